"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 divergence, 3 invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, engine
from .analysis import RateBoundInputs, mt_rate_bound
from .config import RunConfig, config_reference, load_config
from .engine import METRIC_COLUMNS, RoundMetrics, RunResult
from .exceptions import ConfigError
from .topology import spectral_gap

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_INVARIANT = 3

OUT_ENV = "MOMTRACK_OUT"

logger = logging.getLogger("momtrack")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_metrics_csv(metrics, path) -> None:
    """Write one row per recorded round; floats use round-trip repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_COLUMNS)
        for m in metrics:
            writer.writerow([_fmt(v) for v in m.as_row()])


def read_metrics_csv(path) -> list[RoundMetrics]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        RoundMetrics(
            round=int(r["round"]),
            f_xbar=float(r["f_xbar"]),
            grad_norm_sq=float(r["grad_norm_sq"]),
            consensus_xi=float(r["consensus_xi"]),
            c_sum_norm=float(r["c_sum_norm"]),
            u_bar_norm=float(r["u_bar_norm"]),
            vectors_tx=int(r["vectors_tx"]),
        )
        for r in rows
    ]


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def _write_result(result: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(result.metrics, out / "metrics.csv")
    _write_json(result.summary(), out / "summary.json")


def _mean_metrics(results: list[RunResult]) -> list[RoundMetrics]:
    """Per-round mean across repeats (runs must share their recorded rounds)."""
    n = min(len(r.metrics) for r in results)
    out = []
    for k in range(n):
        rows = [r.metrics[k] for r in results]
        out.append(
            RoundMetrics(
                rows[0].round,
                *(float(np.mean([getattr(m, c) for m in rows])) for c in METRIC_COLUMNS[1:-1]),
                rows[0].vectors_tx,
            )
        )
    return out


def _load(args) -> RunConfig:
    config = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "cadence", None) is not None:
        changes["cadence"] = args.cadence
    return config.replace(**changes) if changes else config


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, "runs"))


def cmd_run(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    if args.repeats == 1:
        result = engine.run(config)
        _write_result(result, out)
        print(f"{result.summary()['status']}: wrote {out / 'metrics.csv'}")
        return EXIT_OK if result.completed else EXIT_DIVERGED
    results = []
    for k in range(args.repeats):
        result = engine.run(config.replace(seed=config.seed + k))
        _write_result(result, out / f"seed-{k}")
        results.append(result)
    write_metrics_csv(_mean_metrics(results), out / "metrics_mean.csv")
    ok = all(r.completed for r in results)
    print(f"{'completed' if ok else 'diverged'}: {args.repeats} repeats under {out}")
    return EXIT_OK if ok else EXIT_DIVERGED


def _value_label(axis, value) -> str:
    return f"{axis}={value}"


def cmd_sweep(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()] if args.values else []
    plan = engine.sweep_configs(config, args.axis, values, args.repeats)
    results = engine.sweep(config, args.axis, values, args.repeats, workers=args.workers)
    groups: dict = {}
    for (value, k, _), result in zip(plan, results):
        _write_result(result, out / _value_label(args.axis, value) / f"seed-{k}")
        groups.setdefault(value, []).append(result)
    for value, rs in groups.items():
        write_metrics_csv(_mean_metrics(rs), out / _value_label(args.axis, value) / "metrics_mean.csv")
    report = {
        "schema_version": 1,
        "axis": args.axis,
        "values": [v for v in groups],
        "repeats": args.repeats,
        "runs": [
            {"value": v, "repeat": k, "status": r.summary()["status"], "tail_mean_grad_norm_sq": r.tail_mean("grad_norm_sq", config.window)}
            for (v, k, _), r in zip(plan, results)
        ],
    }
    diverged = any(not r.completed for r in results)
    if args.axis == "zeta2" and len(groups) >= 2 and not diverged:
        verdict = analysis.heterogeneity_independence_test(groups, window=config.window)
        report["heterogeneity"] = verdict.to_dict()
        print(f"heterogeneity verdict: {report['heterogeneity']['verdict']} (ratio {verdict.ratio:.4g})")
    out.mkdir(parents=True, exist_ok=True)
    _write_json(report, out / "sweep_report.json")
    print(f"wrote {len(results)} runs under {out}")
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_verify(args) -> int:
    config = _load(args)
    checks = analysis.run_invariant_battery(config, rounds=args.rounds)
    for check in checks:
        print(check.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_INVARIANT


def cmd_bound(args) -> int:
    if args.config:
        config = _load(args)
        problem = engine.build_problem(config)
        mixing = engine.build_mixing(config.topology)
        x0 = config.x0.resolve(problem.d)
        r0 = problem.global_value(x0) - problem.optimal_value()
        inputs = RateBoundInputs(
            r0=args.r0 if args.r0 is not None else max(r0, 0.0),
            sigma2=args.sigma2 if args.sigma2 is not None else problem.sigma2,
            L=args.L if args.L is not None else problem.smoothness,
            p=args.p if args.p is not None else spectral_gap(mixing),
            beta=args.beta if args.beta is not None else config.algorithm.effective_beta,
            n=args.n if args.n is not None else problem.n,
            R=args.rounds if args.rounds is not None else config.rounds,
        )
    else:
        missing = [k for k in ("r0", "sigma2", "L", "p", "beta", "n", "rounds") if getattr(args, k) is None]
        if missing:
            raise ConfigError(f"bound needs --config or all of: {', '.join('--' + m for m in missing)}")
        inputs = RateBoundInputs(args.r0, args.sigma2, args.L, args.p, args.beta, args.n, args.rounds)
    bound = mt_rate_bound(inputs)
    payload = {
        "schema_version": 1,
        "label": "diagnostic, constants = 1",
        "inputs": {"r0": inputs.r0, "sigma2": inputs.sigma2, "L": inputs.L, "p": inputs.p, "beta": inputs.beta, "n": inputs.n, "R": inputs.R},
        **bound._asdict(),
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_config_reference(args) -> int:
    text = config_reference()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momtrack", description="Decentralized momentum-tracking simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="YAML run configuration")
        if out:
            p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
        p.add_argument("--seed", type=int, help="override the run seed")
        p.add_argument("--cadence", type=int, help="record metrics every k rounds")

    p = sub.add_parser("run", help="execute one configuration")
    common(p)
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a configuration across values of one parameter")
    common(p)
    p.add_argument("--axis", required=True, help=", ".join(engine.SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check structural invariants on a configuration")
    common(p, out=False)
    p.add_argument("--rounds", type=int, default=200)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bound", help="evaluate the Momentum Tracking rate terms")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--r0", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--rounds", "--R", dest="rounds", type=int)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("config-reference", help="print the configuration reference")
    p.add_argument("--out")
    p.set_defaults(func=cmd_config_reference)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "repeats", 1) < 1:
        print("error: repeats must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
