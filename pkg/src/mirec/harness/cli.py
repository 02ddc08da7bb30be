"""Command line entry point: ``mirec {run,sweep,compare,oracle}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from .. import oracle
from ..domain import budgets_from_shares
from .config import ConfigError, RunConfig
from .logs import read_stream, summary_row, write_step_log, write_stream, write_summary
from .simulate import compare, run_stream, slot_weights, sweep

# flag -> dotted config key
OVERRIDES = {
    "horizon": "horizon",
    "n_slots": "n_slots",
    "method": "allocator.method",
    "solver": "allocator.solver",
    "update_rule": "allocator.update_rule",
    "pacing": "allocator.pacing",
    "step_c": "allocator.step_c",
    "noise_sigma": "scorer.noise_sigma",
}


def _parse_set(items):
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key] = yaml.safe_load(raw)
    return out


def load_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    flat = {key: getattr(args, flag) for flag, key in OVERRIDES.items() if getattr(args, flag, None) is not None}
    if getattr(args, "seed", None) is not None:
        flat["seed"] = args.seed
    flat.update(_parse_set(args.set))
    return config.override(**flat) if flat else config


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _dump(obj, path: Path):
    path.write_text(json.dumps(_jsonable(obj), indent=2))


def cmd_run(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_stream(config, benchmark=args.benchmark, keep_requests=bool(args.record_stream))
    write_step_log(result.records, out / "steps.jsonl")
    config.save(out / "config.yaml")
    _dump(asdict(result.report), out / "report.json")
    write_summary([summary_row(result.report)], out / "summary.csv")
    if args.record_stream:
        write_stream(result.requests, args.record_stream)
    r = result.report
    print(f"{r.method} T={r.horizon} seed={r.seed} utility={r.utility:.4f} underspend={r.underspend:.4g} "
          f"violation_max={r.violation_max:.4%} tau_freeze={r.tau_freeze} regret={r.regret}")
    return 1 if r.error else 0


def cmd_sweep(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = sweep(config, args.horizons, args.seeds, benchmark=args.benchmark, n_jobs=args.jobs)
    write_summary([summary_row(r) for r in res.reports], out / "summary.csv")
    _dump(
        {"table": res.table, "regret_slope": res.regret_slope, "underspend_slope": res.underspend_slope,
         "step_c": config.allocator.step_c},
        out / "scaling.json",
    )
    for T, row in res.table.items():
        print(f"T={T} eta={row['eta']:.4g} regret={row['regret']:.4g} underspend={row['underspend']:.4g}")
    print(f"slopes: regret={res.regret_slope:.3f} underspend={res.underspend_slope:.3f}")
    return 0


def cmd_compare(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = compare(config, args.methods, args.seeds)
    write_summary([summary_row(r) for s in res.values() for r in s.reports], out / "summary.csv")
    table = {m: {k: v for k, v in asdict(s).items() if k != "reports"} for m, s in res.items()}
    _dump(table, out / "lift.json")
    for m, s in res.items():
        lift = "-" if s.lift is None else f"{s.lift:+.2%}"
        viol = " ".join(f"{v:.2%}" for v in s.violation_by_channel)
        print(f"{m:6s} utility={s.utility:.3f} lift={lift} violation=[{viol}]")
    return 0


def cmd_oracle(args) -> int:
    config = load_config(args)
    requests = list(read_stream(args.stream))
    requests = [r.with_utilities(r.realized_utilities) for r in requests]
    model = config.exposure_model()
    ledger = budgets_from_shares(config.channel_specs(), len(requests), model)
    weights = slot_weights(config)
    inst = oracle.HindsightInstance(requests, ledger, weights)
    report = {"horizon": len(requests), "n_channels": ledger.n_channels, "dp": None, "dp_status": "out_of_bounds"}
    if inst.within_dp_bounds():
        try:
            report["dp"] = oracle.hindsight_opt_dp(inst).value
            report["dp_status"] = "ok"
        except oracle.InfeasibleInstance:
            report["dp_status"] = "infeasible"
    if ledger.n_channels <= 2:
        bound = oracle.dual_upper_bound(requests, ledger, weights)
    else:
        bound = oracle.dual_upper_bound(requests, ledger, weights, np.zeros((1, ledger.n_channels)), refine=False)
    report.update(dual_bound=bound.value, dual_mu=bound.mu.tolist(), dual_points=bound.n_points)
    text = json.dumps(_jsonable(report), indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mirec", description="Online multi-channel exposure allocation simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_required=False):
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--seed", type=int, required=seed_required)
        p.add_argument("--horizon", type=int)
        p.add_argument("--n-slots", dest="n_slots", type=int)
        p.add_argument("--method", choices=("me2a", "fixed", "wpo"))
        p.add_argument("--solver", choices=("auto", "assignment", "separable", "brute"))
        p.add_argument("--update-rule", dest="update_rule", choices=("free", "projected"))
        p.add_argument("--pacing", choices=("static", "adaptive"))
        p.add_argument("--step-c", dest="step_c", type=float)
        p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any dotted config key")

    p = sub.add_parser("run", help="single stream")
    common(p, seed_required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--benchmark", choices=("none", "auto", "dp"), default="none")
    p.add_argument("--record-stream", help="also write the request stream to this file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="scaling grid over horizons and seeds")
    common(p)
    p.add_argument("--horizons", type=int, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", required=True)
    p.add_argument("--benchmark", choices=("none", "auto", "dp"), default="none")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="methods head to head on identical streams")
    common(p)
    p.add_argument("--methods", nargs="+", default=["me2a", "wpo", "fixed"], choices=("me2a", "fixed", "wpo"))
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="benchmarks for a recorded stream")
    common(p)
    p.add_argument("--stream", required=True, help="stream file written by `run --record-stream`")
    p.add_argument("--out", help="write the JSON report here as well")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
