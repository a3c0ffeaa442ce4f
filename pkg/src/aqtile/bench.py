"""Benchmark harness: synthetic data, pan workloads, engine comparison.

Three engine variants run the same workload against a shared exact oracle:
VAL answers exactly (error bound pinned to 0), VAL-S samples every query
region from scratch without touching stored metadata, and VAL-A is the full
adaptive engine with metadata reuse. Reports carry per-query rows (time, I/O
operations, estimated and actual relative error, CI bounds, coverage) plus
grouped summaries.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .bootstrap import InitConfig
from .engine import Engine, EngineConfig, ExploratoryQuery
from .estimator import AggregateSpec
from .index import Interval
from .oracle import ExactOracle
from .rawstore import DatasetDescriptor

ENGINES = ("VAL", "VAL-S", "VAL-A")

# engine name -> (reuse_metadata, force_exact)
_ENGINE_FLAGS = {
    "VAL": (True, True),
    "VAL-S": (False, False),
    "VAL-A": (True, False),
}

_DIRECTIONS = (
    (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
)


@dataclass(frozen=True)
class SynthSpec:
    n_objects: int
    n_attributes: int
    value_lo: float = 0.0
    value_hi: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        if self.n_attributes < 3:
            raise ValueError("need at least two axes plus one aggregate attribute")

    def descriptor(self, path: str) -> DatasetDescriptor:
        names = ["x", "y"] + [f"a{i}" for i in range(2, self.n_attributes)]
        return DatasetDescriptor(
            file_path=str(path),
            attributes=tuple((n, "numeric") for n in names),
            axis_x=0,
            axis_y=1,
        )


@dataclass(frozen=True)
class WorkloadSpec:
    window: tuple[float, float]           # (width, height) in axis units
    aggs: tuple[AggregateSpec, ...]
    n_queries: int = 100
    shift_fraction: float = 0.10
    trajectory_bias: float = 0.6
    eps_max: float = 0.01
    gamma: float = 0.95
    seed: int = 0
    start: tuple[float, float] | None = None  # first window center; domain center if None

    def __post_init__(self):
        if not 0.0 < self.shift_fraction < 1.0:
            raise ValueError("shift_fraction must be in (0, 1)")


def window_for_target(domain, n_objects: int, target: int) -> tuple[float, float]:
    """Square window sized so a uniform dataset yields ~target objects."""
    x_lo, x_hi, y_lo, y_hi = domain
    frac = min(1.0, target / max(n_objects, 1))
    side = math.sqrt(frac)
    return (side * (x_hi - x_lo), side * (y_hi - y_lo))


def gen_data(spec: SynthSpec, out_path, chunk_rows: int = 200_000) -> dict:
    """Write a uniform synthetic CSV; same spec and seed give identical bytes."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    names = ["x", "y"] + [f"a{i}" for i in range(2, spec.n_attributes)]
    written = 0
    with open(out_path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        while written < spec.n_objects:
            n = min(chunk_rows, spec.n_objects - written)
            block = rng.uniform(spec.value_lo, spec.value_hi, size=(n, spec.n_attributes))
            pd.DataFrame(block).to_csv(fh, header=False, index=False, float_format="%.6f")
            written += n
    return {
        "path": str(out_path),
        "rows": written,
        "bytes": out_path.stat().st_size,
        "columns": names,
    }


def gen_workload(spec: WorkloadSpec, domain) -> list[ExploratoryQuery]:
    """A pan sequence: each window is the previous one shifted by a fixed
    fraction in a random direction biased toward one heading drawn up front."""
    x_lo, x_hi, y_lo, y_hi = domain
    w, h = spec.window
    w = min(w, x_hi - x_lo)
    h = min(h, y_hi - y_lo)
    rng = np.random.default_rng(spec.seed)
    heading = int(rng.integers(0, len(_DIRECTIONS)))
    cx, cy = spec.start if spec.start is not None else (
        0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi)
    )
    x0 = min(max(cx - 0.5 * w, x_lo), x_hi - w)
    y0 = min(max(cy - 0.5 * h, y_lo), y_hi - h)

    queries = []
    for k in range(spec.n_queries):
        if k > 0:
            if rng.random() < spec.trajectory_bias:
                d = _DIRECTIONS[heading]
            else:
                d = _DIRECTIONS[int(rng.integers(0, len(_DIRECTIONS)))]
            x0 = min(max(x0 + d[0] * spec.shift_fraction * w, x_lo), x_hi - w)
            y0 = min(max(y0 + d[1] * spec.shift_fraction * h, y_lo), y_hi - h)
        queries.append(
            ExploratoryQuery(
                ix=Interval(x0, x0 + w),
                iy=Interval(y0, y0 + h),
                aggs=spec.aggs,
                eps_max=spec.eps_max,
                gamma=spec.gamma,
            )
        )
    return queries


@dataclass
class RunReport:
    rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def rows_for(self, engine: str, eps_max: float | None = None) -> list[dict]:
        out = [r for r in self.rows if r["engine"] == engine]
        if eps_max is not None:
            out = [r for r in out if r["eps_max"] == eps_max]
        return out

    def summary_for(self, engine: str, eps_max: float) -> dict:
        for s in self.summary:
            if s["engine"] == engine and s["eps_max"] == eps_max:
                return s
        raise KeyError((engine, eps_max))


def _eps_actual(value_hat: float, exact: float) -> float:
    if exact == 0.0:
        return 0.0 if value_hat == 0.0 else math.inf
    return abs(value_hat - exact) / abs(exact)


def run(
    dataset: DatasetDescriptor,
    workload: WorkloadSpec,
    domain,
    engines=ENGINES,
    cfg: EngineConfig | None = None,
    init_cfg: InitConfig | None = None,
    eps_list=None,
) -> RunReport:
    """Execute the workload per engine (and per error bound), scored against
    the exact oracle. Each engine starts from a fresh index built on Q0; the
    init cost is reported separately from per-query times."""
    cfg = cfg or EngineConfig()
    init_cfg = init_cfg or InitConfig(bounds=tuple(domain))
    eps_list = list(eps_list) if eps_list is not None else [workload.eps_max]
    queries = gen_workload(workload, domain)
    agg_attrs = [a.attribute for a in workload.aggs if a.func != "count"]
    oracle = ExactOracle(dataset, agg_attrs)

    report = RunReport(config={
        "dataset": dataset.to_json(),
        "n_queries": workload.n_queries,
        "window": list(workload.window),
        "eps_list": eps_list,
        "gamma": workload.gamma,
        "engines": list(engines),
        "seed": workload.seed,
    })

    for eps_max in eps_list:
        run_queries = [replace(q, eps_max=eps_max) for q in queries]
        exact_values = [oracle.aggregate_query(q) for q in run_queries]
        for name in engines:
            if name not in _ENGINE_FLAGS:
                raise ValueError(f"unknown engine {name!r}")
            reuse, force_exact = _ENGINE_FLAGS[name]
            engine = Engine(
                dataset, cfg=cfg, init_cfg=init_cfg,
                reuse_metadata=reuse, force_exact=force_exact,
            )
            try:
                _run_engine(report, engine, name, eps_max, run_queries, exact_values)
            except Exception as e:  # isolate a crashing engine to its column
                report.summary.append({
                    "engine": name, "eps_max": eps_max, "error": repr(e),
                })
            finally:
                engine.close()
    return report


def _run_engine(report, engine, name, eps_max, queries, exact_values) -> None:
    init_ms = 0.0
    per_query = []
    for qid, query in enumerate(queries):
        result = engine.execute(query)
        if qid == 0:
            init_ms = result.stats.elapsed_ms
        per_query.append(result)
        for agg in query.aggs:
            exact = exact_values[qid][agg]
            row = {
                "query_id": qid,
                "engine": name,
                "eps_max": eps_max,
                "agg": agg.label(),
                "elapsed_ms": result.stats.elapsed_ms,
                "io_reads": result.stats.io_reads,
                "iterations": result.stats.sampling_iterations,
                "tiles_split": result.stats.tiles_split,
                "exact_value": exact,
            }
            est = result.estimates.get(agg)
            if est is None:
                row["error"] = result.errors.get(agg, "missing estimate")
            else:
                # tolerance keeps zero-width (exact) intervals from failing
                # coverage on float summation-order noise vs the oracle
                tol = 1e-9 * max(1.0, abs(exact)) if exact is not None else 0.0
                covered = (
                    exact is not None
                    and est.ci_lo - tol <= exact <= est.ci_hi + tol
                )
                row.update({
                    "value_hat": est.value_hat,
                    "ci_lo": est.ci_lo,
                    "ci_hi": est.ci_hi,
                    "eps_est": est.eps_est,
                    "exact_flag": est.exact,
                    "eps_actual": (
                        _eps_actual(est.value_hat, exact) if exact is not None else None
                    ),
                    "covered": covered,
                })
            report.rows.append(row)

    # Q0 is answered during index construction and is common to all engines;
    # totals cover Q1.. while init cost is carried separately.
    tail = per_query[1:]
    scored = [
        r for r in report.rows
        if r["engine"] == name and r["eps_max"] == eps_max and "covered" in r
    ]
    n_cov = sum(1 for r in scored if r["covered"])
    report.summary.append({
        "engine": name,
        "eps_max": eps_max,
        "init_ms": init_ms,
        "total_elapsed_ms": sum(r.stats.elapsed_ms for r in tail),
        "total_io_reads": sum(r.stats.io_reads for r in tail),
        "total_iterations": sum(r.stats.sampling_iterations for r in tail),
        "tiles_split": sum(r.stats.tiles_split for r in per_query),
        "coverage": (n_cov / len(scored)) if scored else 1.0,
        "n_queries": len(per_query),
    })


def _speedups(summary: list[dict]) -> list[dict]:
    out = []
    by_eps: dict[float, dict[str, dict]] = {}
    for s in summary:
        if "error" in s:
            continue
        by_eps.setdefault(s["eps_max"], {})[s["engine"]] = s
    for eps, engines in sorted(by_eps.items()):
        if "VAL-A" not in engines:
            continue
        ref = engines["VAL-A"]
        entry = {"eps_max": eps}
        for name, s in engines.items():
            if name == "VAL-A":
                continue
            if ref["total_elapsed_ms"] > 0:
                entry[f"speedup_vs_{name}"] = (
                    s["total_elapsed_ms"] / ref["total_elapsed_ms"]
                )
            if ref["total_io_reads"] > 0:
                entry[f"io_ratio_vs_{name}"] = (
                    s["total_io_reads"] / ref["total_io_reads"]
                )
        out.append(entry)
    return out


def report(run_report: RunReport, out_dir) -> dict:
    """Write per-query CSV, summary JSON, and plot-ready CSVs. Returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}

    # raw run dump so `aqtile report` can re-emit without re-running engines
    run_path = out_dir / "run.json"
    with open(run_path, "w") as fh:
        json.dump(
            {"rows": run_report.rows, "summary": run_report.summary,
             "config": run_report.config},
            fh,
        )
    paths["run"] = str(run_path)

    rows_path = out_dir / "queries.csv"
    fieldnames = [
        "query_id", "engine", "eps_max", "agg", "elapsed_ms", "io_reads",
        "iterations", "tiles_split", "value_hat", "ci_lo", "ci_hi",
        "eps_est", "eps_actual", "exact_value", "exact_flag", "covered", "error",
    ]
    with open(rows_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(run_report.rows)
    paths["queries"] = str(rows_path)

    summary_doc = {
        "config": run_report.config,
        "engines": run_report.summary,
        "speedups": _speedups(run_report.summary),
    }
    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary_doc, fh, indent=2)
    paths["summary"] = str(summary_path)

    # plot data: per-query time and I/O (one column per engine), and
    # total time vs error bound
    eps_list = run_report.config.get("eps_list", [])
    engines = run_report.config.get("engines", [])
    if eps_list:
        eps0 = eps_list[0]
        for metric in ("elapsed_ms", "io_reads"):
            path = out_dir / f"per_query_{metric}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["query_id"] + list(engines))
                series = {
                    e: {r["query_id"]: r[metric] for r in run_report.rows_for(e, eps0)}
                    for e in engines
                }
                qids = sorted({r["query_id"] for r in run_report.rows})
                for qid in qids:
                    writer.writerow(
                        [qid] + [series[e].get(qid, "") for e in engines]
                    )
            paths[f"per_query_{metric}"] = str(path)

    path = out_dir / "total_time_vs_eps.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["engine", "eps_max", "total_elapsed_ms", "total_io_reads"])
        for s in run_report.summary:
            if "error" not in s:
                writer.writerow(
                    [s["engine"], s["eps_max"], s["total_elapsed_ms"], s["total_io_reads"]]
                )
    paths["total_time_vs_eps"] = str(path)

    # confidence interval vs exact value, one file per engine at the first bound
    if eps_list:
        for engine_name in engines:
            rows = [
                r for r in run_report.rows_for(engine_name, eps_list[0])
                if "value_hat" in r
            ]
            if not rows:
                continue
            path = out_dir / f"ci_vs_exact_{engine_name.lower().replace('-', '_')}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(
                    ["query_id", "agg", "value_hat", "ci_lo", "ci_hi",
                     "exact_value", "covered"]
                )
                for r in rows:
                    writer.writerow(
                        [r["query_id"], r["agg"], r["value_hat"], r["ci_lo"],
                         r["ci_hi"], r["exact_value"], r["covered"]]
                    )
            paths[f"ci_vs_exact_{engine_name}"] = str(path)
    return paths
