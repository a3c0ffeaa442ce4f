"""Command-line interface: gen-data, gen-workload, run, report, serve.

Flags mirror the config dataclass fields; a JSON config file can override
defaults (flags win over the file).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    ENGINES,
    RunReport,
    SynthSpec,
    WorkloadSpec,
    gen_data,
    gen_workload,
    report,
    run,
    window_for_target,
)
from .bootstrap import InitConfig
from .engine import EngineConfig
from .estimator import AggregateSpec
from .rawstore import DatasetDescriptor


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _parse_aggs(raw: list[str]) -> tuple[AggregateSpec, ...]:
    """Parse aggregates like 'sum:2', 'mean:3', or 'count'."""
    out = []
    for item in raw:
        if ":" in item:
            func, attr = item.split(":", 1)
            out.append(AggregateSpec(func, int(attr)))
        else:
            out.append(AggregateSpec(item))
    return tuple(out)


def cmd_gen_data(args) -> int:
    cfg = _load_config(args.config)
    spec = SynthSpec(
        n_objects=args.n_objects or cfg.get("n_objects", 1_000_000),
        n_attributes=args.n_attributes or cfg.get("n_attributes", 10),
        seed=args.seed if args.seed is not None else cfg.get("seed", 0),
    )
    info = gen_data(spec, args.out)
    descriptor = spec.descriptor(args.out)
    descriptor_path = Path(args.out).with_suffix(".descriptor.json")
    descriptor_path.write_text(json.dumps(descriptor.to_json(), indent=2))
    info["descriptor"] = str(descriptor_path)
    print(json.dumps(info, indent=2))
    return 0


def _domain(args, cfg) -> tuple[float, float, float, float]:
    if args.domain:
        lo_x, hi_x, lo_y, hi_y = (float(v) for v in args.domain.split(","))
        return lo_x, hi_x, lo_y, hi_y
    return tuple(cfg.get("domain", (0.0, 1000.0, 0.0, 1000.0)))


def _workload_spec(args, cfg, domain) -> WorkloadSpec:
    aggs = _parse_aggs(args.agg or cfg.get("aggs", ["sum:2"]))
    if args.window:
        w, h = (float(v) for v in args.window.split(","))
        window = (w, h)
    else:
        window = window_for_target(
            domain,
            args.dataset_rows or cfg.get("dataset_rows", 1_000_000),
            args.target_objects or cfg.get("target_objects", 10_000),
        )
    return WorkloadSpec(
        window=window,
        aggs=aggs,
        n_queries=args.n_queries or cfg.get("n_queries", 100),
        shift_fraction=cfg.get("shift_fraction", 0.10),
        trajectory_bias=cfg.get("trajectory_bias", 0.6),
        eps_max=args.eps_max[0] if args.eps_max else cfg.get("eps_max", 0.01),
        gamma=args.gamma or cfg.get("gamma", 0.95),
        seed=args.seed if args.seed is not None else cfg.get("seed", 0),
    )


def cmd_gen_workload(args) -> int:
    cfg = _load_config(args.config)
    domain = _domain(args, cfg)
    spec = _workload_spec(args, cfg, domain)
    queries = gen_workload(spec, domain)
    doc = [
        {
            "ix": {"lo": q.ix.lo, "hi": q.ix.hi},
            "iy": {"lo": q.iy.lo, "hi": q.iy.hi},
            "aggs": [{"func": a.func, "attribute": a.attribute} for a in q.aggs],
            "eps_max": q.eps_max,
            "gamma": q.gamma,
        }
        for q in queries
    ]
    out = Path(args.out) if args.out else None
    text = json.dumps(doc, indent=2)
    if out:
        out.write_text(text)
        print(f"wrote {len(queries)} queries to {out}")
    else:
        print(text)
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    descriptor_path = args.descriptor or str(Path(args.data).with_suffix(".descriptor.json"))
    descriptor_doc = json.loads(Path(descriptor_path).read_text())
    descriptor_doc["file_path"] = args.data
    descriptor = DatasetDescriptor.from_json(descriptor_doc)
    domain = _domain(args, cfg)
    workload = _workload_spec(args, cfg, domain)
    engine_cfg = EngineConfig(
        initial_rate=cfg.get("initial_rate", 0.05),
        rate_cap=cfg.get("rate_cap", 2.0),
        rate_floor=cfg.get("rate_floor", 1.1),
        min_batch=args.min_batch or cfg.get("min_batch", 50),
        split_threshold=cfg.get("split_threshold", 200),
        rng_seed=args.seed if args.seed is not None else cfg.get("seed", 0),
    )
    init_cfg = InitConfig(
        grid_x=cfg.get("grid_x", 100),
        grid_y=cfg.get("grid_y", 100),
        extra_budget_fraction=cfg.get("extra_budget_fraction", 0.20),
        bounds=domain,
    )
    engines = tuple(args.engine) if args.engine else ENGINES
    eps_list = args.eps_max or [workload.eps_max]
    result = run(
        descriptor, workload, domain,
        engines=engines, cfg=engine_cfg, init_cfg=init_cfg, eps_list=eps_list,
    )
    paths = report(result, args.out)
    for s in result.summary:
        print(json.dumps(s))
    print(json.dumps({"report_files": paths}, indent=2))
    return 0


def cmd_report(args) -> int:
    doc = json.loads(Path(args.run_json).read_text())
    rr = RunReport(rows=doc["rows"], summary=doc["summary"], config=doc.get("config", {}))
    paths = report(rr, args.out)
    print(json.dumps({"report_files": paths}, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="aqtile")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a uniform synthetic CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--n-objects", type=int, dest="n_objects")
    p.add_argument("--n-attributes", type=int, dest="n_attributes")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("gen-workload", help="generate a pan-query workload")
    p.add_argument("--out")
    p.add_argument("--n-queries", type=int, dest="n_queries")
    p.add_argument("--window", help="width,height in axis units")
    p.add_argument("--target-objects", type=int, dest="target_objects")
    p.add_argument("--dataset-rows", type=int, dest="dataset_rows")
    p.add_argument("--agg", action="append", help="e.g. sum:2, mean:3, count")
    p.add_argument("--eps-max", type=float, action="append", dest="eps_max")
    p.add_argument("--gamma", type=float)
    p.add_argument("--domain", help="x_lo,x_hi,y_lo,y_hi")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen_workload)

    p = sub.add_parser("run", help="run engines over a workload and report")
    p.add_argument("--data", required=True)
    p.add_argument("--descriptor")
    p.add_argument("--out", required=True)
    p.add_argument("--engine", action="append", choices=ENGINES)
    p.add_argument("--n-queries", type=int, dest="n_queries")
    p.add_argument("--window", help="width,height in axis units")
    p.add_argument("--target-objects", type=int, dest="target_objects")
    p.add_argument("--dataset-rows", type=int, dest="dataset_rows")
    p.add_argument("--agg", action="append", help="e.g. sum:2, mean:3, count")
    p.add_argument("--eps-max", type=float, action="append", dest="eps_max")
    p.add_argument("--gamma", type=float)
    p.add_argument("--min-batch", type=int, dest="min_batch")
    p.add_argument("--domain", help="x_lo,x_hi,y_lo,y_hi")
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="re-emit report files from a saved run JSON")
    p.add_argument("--run-json", required=True, dest="run_json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
