"""Command-line entry point: ``casht {kappa,deadline,verify,simulate,figure}``.

Outputs go under ``$CASHT_OUTPUT_DIR`` (default ``./results``) unless a
path is given explicitly.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .costs import ZeroMassError
from .deadlines import MODES, benefit_verdict, plan_deadlines


def _models(specs):
    try:
        return [ex.parse_model_spec(s) for s in specs]
    except (ValueError, TypeError) as exc:
        raise SystemExit(f"error: {exc}")


def cmd_kappa(args) -> int:
    models = _models(args.model)
    if args.log:
        grid = np.geomspace(args.lo, args.hi, args.points)
    else:
        grid = np.linspace(args.lo, args.hi, args.points)
    rows = []
    for m in models:
        rows.extend(ex.emit_kappa_curve(m, grid))
    text = ex.rows_to_csv(ex.KAPPA_COLUMNS, rows)
    _emit(text, args.out)
    return 0


def cmd_deadline(args) -> int:
    models = _models(args.model)
    fixed = args.fixed if args.mode == "fixed" else None
    plan = plan_deadlines(models, args.mode, fixed)
    rows = []
    for a, (m, t, k) in enumerate(zip(models, plan.deadlines, plan.effective_costs)):
        try:
            verdict = benefit_verdict(m, t).verdict
        except ZeroMassError:
            verdict = ""
        rows.append({"action": a, "model": ex.model_spec(m), "mode": args.mode, "T": t,
                     "kappa": k, "mean": m.mean, "verdict": verdict})
    text = ex.rows_to_csv(("action", "model", "mode", "T", "kappa", "mean", "verdict"), rows)
    _emit(text, args.out)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_simulate(args) -> int:
    try:
        scenario = ex.load_config(Path(args.config).read_text())
        if args.seed is not None:
            scenario = replace(scenario, seed=args.seed)
        if args.full_scale:
            scenario = ex.scale_up(scenario)
        if args.parallelism is not None:
            scenario = replace(scenario, parallelism=args.parallelism)
    except (OSError, ex.ConfigError) as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out) if args.out else Path(scenario.output) if scenario.output else ex.default_output_dir() / scenario.name
    try:
        res = ex.run_scenario(scenario, out, backend=args.backend)
    except Exception as exc:
        print(f"error: scenario {scenario.name!r}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in res.paths.values():
        print(p)
    return 0


def cmd_figure(args) -> int:
    try:
        if args.id in (4, 5):
            out = args.out or str(ex.default_output_dir() / f"figure{args.id}.csv")
            ex.reproduce_figure(args.id, out, desk_scale=args.desk_scale, backend=args.backend)
            print(out)
        else:
            text = ex.reproduce_figure(args.id, args.out)
            if args.out:
                print(args.out)
            else:
                sys.stdout.write(text)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _emit(text: str, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        print(out)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="casht", description="Cost-aware active hypothesis testing with deadlines.")
    sub = p.add_subparsers(dest="command", required=True)
    model_help = "cost model such as 'pareto(1, 1.5)' or 'loglogistic:4,1.5' (repeatable)"

    k = sub.add_parser("kappa", help="effective cost curve(s) as CSV")
    k.add_argument("--model", action="append", required=True, help=model_help)
    k.add_argument("--lo", type=float, required=True)
    k.add_argument("--hi", type=float, required=True)
    k.add_argument("--points", type=int, default=100)
    k.add_argument("--log", action="store_true", help="log-spaced grid")
    k.add_argument("--out", help="CSV path (default: stdout)")
    k.set_defaults(func=cmd_kappa)

    d = sub.add_parser("deadline", help="per-action deadline plan as CSV")
    d.add_argument("--model", action="append", required=True, help=model_help)
    d.add_argument("--mode", choices=MODES, default="optimal")
    d.add_argument("--fixed", type=float, nargs="+", help="deadline value(s) for --mode fixed")
    d.add_argument("--out", help="CSV path (default: stdout)")
    d.set_defaults(func=cmd_deadline)

    v = sub.add_parser("verify", help="run the property suites; nonzero exit on failure")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="run a scenario config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.add_argument("--full-scale", action="store_true", help="H=32, 16 actions, 50000 trials")
    s.add_argument("--parallelism", type=int)
    s.add_argument("--backend", choices=("cython", "python"))
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figure", help="data series behind a figure")
    f.add_argument("--id", type=int, required=True, choices=ex.FIGURE_IDS)
    f.add_argument("--out", help="CSV path")
    f.add_argument("--desk-scale", action="store_true", help="figures 4/5: H=8, 4 actions, 2000 trials")
    f.add_argument("--backend", choices=("cython", "python"))
    f.set_defaults(func=cmd_figure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "deadline" and args.mode == "fixed" and not args.fixed:
        raise SystemExit("error: --mode fixed needs --fixed")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
