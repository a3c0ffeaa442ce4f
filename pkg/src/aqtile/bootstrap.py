"""On-the-fly index construction while answering the first query.

The grid is laid out over the axis-attribute domain (supplied bounds, or a
lightweight bounds-discovery pass first), refined with extra smaller tiles
near the first query's window, and then populated in a single file pass that
assigns objects to leaves, computes exact per-tile metadata for the chosen
attributes, and accumulates the first query's aggregates exactly.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import estimator, kernels, rawstore
from .adaptation import split_tile
from .index import Containment, Interval, Tile, TileIndex, TileMetadata, containment


@dataclass(frozen=True)
class InitConfig:
    grid_x: int = 100
    grid_y: int = 100
    extra_budget_fraction: float = 0.20
    init_attributes: tuple[int, ...] | None = None  # default: Q0's aggregate attrs
    bounds: tuple[float, float, float, float] | None = None  # x_lo, x_hi, y_lo, y_hi
    strict: bool = False

    def __post_init__(self):
        if self.grid_x < 1 or self.grid_y < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.extra_budget_fraction < 0:
            raise ValueError("extra_budget_fraction must be >= 0")


@dataclass
class InitStats:
    elapsed_s: float = 0.0
    objects_scanned: int = 0
    rows_skipped: int = 0
    out_of_domain: int = 0
    scan_passes: int = 0
    grid_tiles: int = 0
    extra_tiles: int = 0

    def to_json(self) -> dict:
        return {
            "elapsed_s": self.elapsed_s,
            "objects_scanned": self.objects_scanned,
            "rows_skipped": self.rows_skipped,
            "out_of_domain": self.out_of_domain,
            "scan_passes": self.scan_passes,
            "grid_tiles": self.grid_tiles,
            "extra_tiles": self.extra_tiles,
        }


def _discover_bounds(dataset: rawstore.DatasetDescriptor, strict: bool):
    x_lo = y_lo = math.inf
    x_hi = y_hi = -math.inf
    for chunk in rawstore.iter_scan_chunks(dataset, (), strict=strict):
        if len(chunk.offsets) == 0:
            continue
        col = {a: i for i, a in enumerate(chunk.columns)}
        ax = chunk.values[:, col[dataset.axis_x]]
        ay = chunk.values[:, col[dataset.axis_y]]
        x_lo = min(x_lo, float(ax.min()))
        x_hi = max(x_hi, float(ax.max()))
        y_lo = min(y_lo, float(ay.min()))
        y_hi = max(y_hi, float(ay.max()))
    if not math.isfinite(x_lo):
        raise ValueError("dataset has no parseable rows")
    return x_lo, x_hi, y_lo, y_hi


def build_grid(bounds, nx: int, ny: int) -> TileIndex:
    """Equal-width grid of leaf tiles over the (slightly extended) bounds.

    The top edge on each axis is nudged one ulp past the domain max so the
    maximum value falls inside the last half-open tile.
    """
    x_lo, x_hi, y_lo, y_hi = bounds
    x_hi_e = np.nextafter(max(x_hi, x_lo), np.inf)
    y_hi_e = np.nextafter(max(y_hi, y_lo), np.inf)
    x_edges = np.linspace(x_lo, x_hi_e, nx + 1)
    y_edges = np.linspace(y_lo, y_hi_e, ny + 1)
    roots = [
        Tile(Interval(x_edges[c], x_edges[c + 1]), Interval(y_edges[r], y_edges[r + 1]))
        for r in range(ny)
        for c in range(nx)
    ]
    return TileIndex(
        roots=roots, nx=nx, ny=ny,
        x_lo=float(x_edges[0]), x_hi=float(x_edges[-1]),
        y_lo=float(y_edges[0]), y_hi=float(y_edges[-1]),
    )


def query_driven_refine(index: TileIndex, q0, extra_budget: int) -> int:
    """Split leaves near the first query, breadth-first, within a tile budget.

    "Near" is a 2x-expanded copy of the query window centered on it. Each
    split replaces one leaf with four (3 net new tiles), so the number of
    splits is extra_budget // 3. Returns the number of tiles added.
    """
    if extra_budget < 3:
        return 0
    ex_w = q0.ix.width
    ex_h = q0.iy.width
    exp_x = Interval(q0.ix.lo - 0.5 * ex_w, q0.ix.hi + 0.5 * ex_w)
    exp_y = Interval(q0.iy.lo - 0.5 * ex_h, q0.iy.hi + 0.5 * ex_h)
    queue = deque(
        t for t in index.leaves()
        if containment(t, exp_x, exp_y) is not Containment.NONE
    )
    splits_left = extra_budget // 3
    added = 0
    while queue and splits_left > 0:
        tile = queue.popleft()
        if tile.ix.width <= 0 or tile.iy.width <= 0:
            continue
        children = split_tile(tile)
        splits_left -= 1
        added += 3
        queue.extend(
            c for c in children
            if containment(c, exp_x, exp_y) is not Containment.NONE
        )
    return added


class _LeafRouter:
    """Maps points to final leaf ordinals: grid cell lookup, then descent
    through any refined subtree."""

    def __init__(self, index: TileIndex):
        self.x_edges = np.array(
            [index.roots[c].ix.lo for c in range(index.nx)] + [index.x_hi]
        )
        self.y_edges = np.array(
            [index.roots[r * index.nx].iy.lo for r in range(index.ny)] + [index.y_hi]
        )
        self.nx = index.nx
        self.leaves = list(index.leaves())
        self.ord_of = {id(t): i for i, t in enumerate(self.leaves)}
        # per root cell: leaf ordinal, or -1 when the root was refined
        self.root_ord = np.empty(len(index.roots), np.int64)
        self.refined: dict[int, Tile] = {}
        for cell, root in enumerate(index.roots):
            if root.is_leaf:
                self.root_ord[cell] = self.ord_of[id(root)]
            else:
                self.root_ord[cell] = -1
                self.refined[cell] = root

    def route(self, ax: np.ndarray, ay: np.ndarray):
        """Returns (leaf_ordinals, in_domain_mask) for a batch of points."""
        cells = kernels.grid_cell_ids(ax, ay, self.x_edges, self.y_edges)
        ok = cells >= 0
        ords = np.full(len(ax), -1, np.int64)
        ords[ok] = self.root_ord[cells[ok]]
        pending = np.flatnonzero(ok & (ords < 0))
        if len(pending):
            order = pending[np.argsort(cells[pending], kind="stable")]
            cell_sorted = cells[order]
            cuts = np.flatnonzero(np.diff(cell_sorted)) + 1
            for grp in np.split(order, cuts):
                root = self.refined[int(cells[grp[0]])]
                self._descend(root, grp, ax, ay, ords)
        return ords, ok

    def _descend(self, tile: Tile, idx: np.ndarray, ax, ay, ords):
        if tile.is_leaf:
            ords[idx] = self.ord_of[id(tile)]
            return
        mx = tile.ix.mid
        my = tile.iy.mid
        quadrant = (ax[idx] >= mx).astype(np.int8) + 2 * (ay[idx] >= my).astype(np.int8)
        for q in range(4):
            sub = idx[quadrant == q]
            if len(sub):
                self._descend(tile.children[q], sub, ax, ay, ords)


@dataclass
class _Q0Accum:
    """Exact accumulators for the first query's aggregates (one per attribute)."""

    count: int = 0
    sums: dict = field(default_factory=dict)
    mins: dict = field(default_factory=dict)
    maxs: dict = field(default_factory=dict)


def initialize(dataset: rawstore.DatasetDescriptor, q0, cfg: InitConfig):
    """Build the index and answer the first query in the same file pass.

    Returns (TileIndex, q0_estimates, InitStats) where q0_estimates maps each
    of q0's AggregateSpecs to an exact Estimate (or an EstimationError for
    aggregates undefined over an empty region).
    """
    t0 = time.perf_counter()
    stats = InitStats()

    q0_attrs = sorted({a.attribute for a in q0.aggs if a.func != "count"})
    init_attrs = (
        tuple(sorted(cfg.init_attributes)) if cfg.init_attributes is not None
        else tuple(q0_attrs)
    )
    dataset.validate_numeric(init_attrs)
    dataset.validate_numeric(q0_attrs)

    if cfg.bounds is not None:
        bounds = cfg.bounds
        stats.scan_passes = 0
    else:
        bounds = _discover_bounds(dataset, cfg.strict)
        stats.scan_passes = 1

    index = build_grid(bounds, cfg.grid_x, cfg.grid_y)
    stats.grid_tiles = cfg.grid_x * cfg.grid_y
    budget = int(cfg.extra_budget_fraction * stats.grid_tiles)
    stats.extra_tiles = query_driven_refine(index, q0, budget)

    router = _LeafRouter(index)
    n_leaves = len(router.leaves)
    wanted = tuple(sorted(set(init_attrs) | set(q0_attrs)))

    # merged per-leaf moments, one row of arrays per tracked attribute
    acc = {
        a: (
            np.zeros(n_leaves, np.int64), np.zeros(n_leaves), np.zeros(n_leaves),
            np.full(n_leaves, np.inf), np.full(n_leaves, -np.inf),
        )
        for a in init_attrs
    }
    q0acc = _Q0Accum(
        sums={a: 0.0 for a in q0_attrs},
        mins={a: math.inf for a in q0_attrs},
        maxs={a: -math.inf for a in q0_attrs},
    )
    ax_parts, ay_parts, off_parts, ord_parts = [], [], [], []

    for chunk in rawstore.iter_scan_chunks(dataset, wanted, strict=cfg.strict):
        stats.rows_skipped += len(chunk.skipped)
        if len(chunk.offsets) == 0:
            continue
        col = {a: i for i, a in enumerate(chunk.columns)}
        ax = np.ascontiguousarray(chunk.values[:, col[dataset.axis_x]])
        ay = np.ascontiguousarray(chunk.values[:, col[dataset.axis_y]])
        ords, ok = router.route(ax, ay)
        n_out = int(len(ax) - np.count_nonzero(ok))
        if n_out:
            stats.out_of_domain += n_out
            ax, ay = ax[ok], ay[ok]
            ords = ords[ok]
            offs = chunk.offsets[ok]
            vals = chunk.values[ok]
        else:
            offs = chunk.offsets
            vals = chunk.values
        stats.objects_scanned += len(ax)

        for a in init_attrs:
            column = np.ascontiguousarray(vals[:, col[a]])
            part = kernels.group_moments(ords, column, n_leaves)
            acc[a] = kernels.merge_moments(*acc[a], *part)

        in_q0 = kernels.region_mask(ax, ay, q0.ix.lo, q0.ix.hi, q0.iy.lo, q0.iy.hi)
        n_in = int(np.count_nonzero(in_q0))
        if n_in:
            q0acc.count += n_in
            for a in q0_attrs:
                v = vals[in_q0, col[a]]
                q0acc.sums[a] += float(v.sum())
                q0acc.mins[a] = min(q0acc.mins[a], float(v.min()))
                q0acc.maxs[a] = max(q0acc.maxs[a], float(v.max()))

        ax_parts.append(ax)
        ay_parts.append(ay)
        off_parts.append(offs)
        ord_parts.append(ords)

    stats.scan_passes += 1
    if stats.objects_scanned == 0:
        raise ValueError("dataset has no parseable rows")

    _assign_objects(router, ax_parts, ay_parts, off_parts, ord_parts)
    _install_metadata(router, init_attrs, acc)

    q0_estimates = _answer_q0(q0, q0acc)
    stats.elapsed_s = time.perf_counter() - t0
    return index, q0_estimates, stats


def _assign_objects(router, ax_parts, ay_parts, off_parts, ord_parts):
    ax = np.concatenate(ax_parts)
    ay = np.concatenate(ay_parts)
    offs = np.concatenate(off_parts)
    ords = np.concatenate(ord_parts)
    # stable sort by leaf keeps the file-order (ascending offset) within leaves
    order = np.argsort(ords, kind="stable")
    ords_sorted = ords[order]
    starts = np.searchsorted(ords_sorted, np.arange(len(router.leaves)))
    ends = np.searchsorted(ords_sorted, np.arange(len(router.leaves)) + 1)
    for i, leaf in enumerate(router.leaves):
        sel = order[starts[i]:ends[i]]
        leaf.ax = ax[sel]
        leaf.ay = ay[sel]
        leaf.offsets = offs[sel]
        leaf.bitmap = np.ones(len(sel), dtype=bool)


def _install_metadata(router, init_attrs, acc):
    for i, leaf in enumerate(router.leaves):
        leaf.tracked = set(init_attrs)
        for a in init_attrs:
            n, s, m2, mn, mx = (arr[i] for arr in acc[a])
            meta = TileMetadata(
                n=int(n), sum=float(s),
                mean=float(s / n) if n > 0 else 0.0,
                m2=float(m2),
                min_seen=float(mn), max_seen=float(mx),
            )
            leaf.metadata[a] = meta


def _answer_q0(q0, q0acc: _Q0Accum) -> dict:
    out = {}
    for agg in q0.aggs:
        if agg.func == "count":
            out[agg] = estimator.count_exact([q0acc.count], q0.gamma)
            continue
        a = agg.attribute
        if agg.func == "sum":
            v = q0acc.sums[a] if q0acc.count else 0.0
            out[agg] = estimator.Estimate(v, 0.0, v, v, 0.0, q0.gamma, exact=True)
            continue
        if q0acc.count == 0:
            out[agg] = estimator.EmptyRegion(f"{agg.label()} over an empty region")
            continue
        if agg.func == "mean":
            v = q0acc.sums[a] / q0acc.count
            out[agg] = estimator.Estimate(v, 0.0, v, v, 0.0, q0.gamma, exact=True)
        elif agg.func == "min":
            out[agg] = estimator.minmax_exact([q0acc.mins[a]], "min", q0.gamma)
        else:
            out[agg] = estimator.minmax_exact([q0acc.maxs[a]], "max", q0.gamma)
    return out
