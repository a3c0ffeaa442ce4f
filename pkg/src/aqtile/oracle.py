"""Exact reference aggregates by full scan and direct accumulation.

Deliberately independent of the engine: it loads the raw columns once and
answers each query window with plain numpy reductions. Benchmarks and tests
use it to measure actual error and confidence-interval coverage.
"""

from __future__ import annotations

import numpy as np

from .estimator import AggregateSpec
from .rawstore import DatasetDescriptor, scan_arrays


class ExactOracle:
    """Holds the axis columns plus any needed aggregate columns in memory."""

    def __init__(self, dataset: DatasetDescriptor, attributes):
        self.dataset = dataset
        wanted = tuple(sorted(set(attributes)))
        offsets, cols, values, _ = scan_arrays(dataset, wanted)
        pos = {a: i for i, a in enumerate(cols)}
        self.ax = values[:, pos[dataset.axis_x]]
        self.ay = values[:, pos[dataset.axis_y]]
        self.columns = {a: values[:, pos[a]] for a in wanted}
        self.n_rows = len(offsets)

    def aggregate(self, qx_lo, qx_hi, qy_lo, qy_hi, aggs) -> dict:
        """Exact value per AggregateSpec over the closed query window.

        Aggregates undefined on an empty region (mean/min/max) map to None.
        """
        mask = (
            (self.ax >= qx_lo) & (self.ax <= qx_hi)
            & (self.ay >= qy_lo) & (self.ay <= qy_hi)
        )
        count = int(np.count_nonzero(mask))
        out = {}
        for agg in aggs:
            if agg.func == "count":
                out[agg] = float(count)
                continue
            col = self.columns[agg.attribute]
            if agg.func == "sum":
                out[agg] = float(col[mask].sum()) if count else 0.0
                continue
            if count == 0:
                out[agg] = None
            elif agg.func == "mean":
                out[agg] = float(col[mask].sum()) / count
            elif agg.func == "min":
                out[agg] = float(col[mask].min())
            else:
                out[agg] = float(col[mask].max())
        return out

    def aggregate_query(self, query) -> dict:
        return self.aggregate(
            query.ix.lo, query.ix.hi, query.iy.lo, query.iy.hi, query.aggs
        )


def exact_for_values(values: np.ndarray, func: str):
    """Direct aggregate over an explicit value array (small-case test oracle)."""
    arr = np.asarray(values, dtype=np.float64)
    if func == "count":
        return float(arr.size)
    if func == "sum":
        return float(arr.sum()) if arr.size else 0.0
    if arr.size == 0:
        return None
    if func == "mean":
        return float(arr.mean())
    if func == "min":
        return float(arr.min())
    if func == "max":
        return float(arr.max())
    raise ValueError(func)
