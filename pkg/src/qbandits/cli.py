"""Command line entry point: ``qbandits <subcommand> ...``.

Exit codes: 0 success, 1 a failed audit or bound check, 2 usage or path error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import studies
from .audits import AUDIT_COLUMNS
from .harness import (SUMMARY_COLUMNS, ConfigError, ExperimentConfig, adversarial_eval, cpu_threads,
                      emit_audits, emit_csv, emit_curves, emit_summary, fmt, run_experiment,
                      write_table)
from .policies import POLICIES, make_policy

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _int_list(text):
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _policy_arg(text):
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise argparse.ArgumentTypeError(f"bad policy JSON: {exc}") from None
    if text not in POLICIES:
        raise argparse.ArgumentTypeError(f"unknown policy {text!r}; choose from {sorted(POLICIES)}")
    return text


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes (0 = all cores)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    parser = argparse.ArgumentParser(prog="qbandits", description="Multi-armed quantum bandit experiments.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--steps", action="store_true", help="also write step-level steps.csv")

    p = sub.add_parser("lowerbound", parents=[common], help="evaluate a policy on a hard pair")
    p.add_argument("--theorem", required=True, choices=("1", "2", "3", "4", "5"))
    p.add_argument("--policy", required=True, type=_policy_arg)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--d", type=int, default=2, help="dimension for theorem 5")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=0.95)

    p = sub.add_parser("audit", parents=[common], help="exact lemma audits")
    p.add_argument("--lemma", required=True, choices=("1", "2", "3", "4", "5"))
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)

    p = sub.add_parser("sweep", parents=[common], help="regret scaling ratios")
    p.add_argument("--policy", required=True, type=_policy_arg)
    p.add_argument("--horizons", required=True, type=_int_list)
    p.add_argument("--envs", type=int, default=20)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--max-ratio", type=float, default=None, help="fail if any ratio exceeds this")

    p = sub.add_parser("tomography", parents=[common], help="PLS tail study")
    p.add_argument("--n-grid", required=True, type=_int_list)
    p.add_argument("--eps-grid", required=True, type=_float_list)
    p.add_argument("--reps", type=int, default=2000)
    return parser


def print_table(columns, rows, out=None):
    out = out or sys.stdout
    cells = [list(columns)] + [[fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    for row in cells:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip(), file=out)


def _run(args):
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = ExperimentConfig(cfg.environment, cfg.action_set, cfg.policies, cfg.horizons, cfg.replicates,
                               args.seed, cfg.checkpoints, cfg.output_dir)
    out = Path(args.out or cfg.output_dir)
    report = run_experiment(cfg, cpu_threads(args.threads), keep_traces=args.steps)
    emit_summary(report, out / "summary.csv", args.format)
    emit_curves(report, out / "curves.csv", args.format)
    if args.steps:
        emit_csv(report, out / "steps.csv", args.format)
    print_table(SUMMARY_COLUMNS, report.summary)
    for key, count in sorted(report.flags.items()):
        print(f"warning: {key} in {count} replicates", file=sys.stderr)
    return EXIT_FAIL if any(r["pass"] is False for r in report.summary) else EXIT_OK


def _lowerbound(args):
    policy = make_policy(args.policy)
    rec = adversarial_eval(policy, args.theorem, args.n, args.reps, k=args.k, d=args.d, seed=args.seed or 0,
                           threads=cpu_threads(args.threads), tolerance=args.tolerance)
    row = rec.row()
    row.update(delta=rec.delta, regret_rho=rec.regret[0], regret_rho_prime=rec.regret[1])
    cols = SUMMARY_COLUMNS + ("delta", "regret_rho", "regret_rho_prime")
    write_table(Path(args.out or "results") / "lowerbound.csv", cols, [row], args.format)
    print_table(cols, [row])
    return EXIT_OK if rec.passed else EXIT_FAIL


def _audit(args):
    rows = studies.lemma_rows(args.lemma, n=args.n, k=args.k, delta=args.delta, seed=args.seed or 0)
    emit_audits(rows, Path(args.out or "results") / "audits.csv", args.format)
    shown = [dict(r, **{"pass": r["passed"]}) for r in rows]
    if args.lemma in ("1", "2"):
        bad = [r for r in shown if not r["pass"]]
        print(f"{len(rows)} Bernoulli pairs, {len(bad)} violations")
        print_table(AUDIT_COLUMNS, bad or shown[:5])
    else:
        print_table(AUDIT_COLUMNS, shown)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL


def _sweep(args):
    rows = studies.sweep_rows(args.policy, args.horizons, args.envs, args.reps, args.seed or 0,
                              cpu_threads(args.threads))
    write_table(Path(args.out or "results") / "sweep.csv", studies.SWEEP_COLUMNS, rows, args.format)
    print_table(studies.SWEEP_COLUMNS, rows)
    if args.max_ratio is not None and any(r["ratio"] > args.max_ratio for r in rows):
        return EXIT_FAIL
    return EXIT_OK


def _tomography(args):
    rows = studies.pls_tail_rows(args.n_grid, args.eps_grid, args.reps, args.seed or 0)
    write_table(Path(args.out or "results") / "tomography.csv", studies.TAIL_COLUMNS, rows, args.format)
    print_table(studies.TAIL_COLUMNS, rows)
    return EXIT_OK if all(r["pass"] for r in rows) else EXIT_FAIL


COMMANDS = {"run": _run, "lowerbound": _lowerbound, "audit": _audit, "sweep": _sweep, "tomography": _tomography}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (OSError, ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"qbandits {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
