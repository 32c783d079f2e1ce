"""Command line entry point: ``srptk <subcommand> [--config FILE] [--key=value ...]``."""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import config as C
from . import experiments as X
from .csvio import write_rows

__all__ = ["main"]

HELP = {
    "simulate": "simulate one policy and write summary.csv and jobs.csv",
    "bounds": "evaluate the analytic bounds on an x grid (bounds.csv)",
    "sweep-ratio": "E[T^SRPT-k]/E[T^SRPT-1] over a load grid (ratio.csv, ratio.svg)",
    "couple": "coupled-system lemma suite (violations.csv, summary.csv)",
    "audit": "tagged-job virtual-work audit (violations.csv, summary.csv)",
    "counterexample": "four-job SRPT-2 counterexample (counterexample.csv)",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srptk", description="Multiserver SRPT analysis toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in C.COMMANDS:
        s = sub.add_parser(
            name, help=HELP[name],
            epilog="Any config field can be overridden with --key=value (dotted keys, JSON values).",
        )
        s.add_argument("--config", help="JSON config document")
        s.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return p


def _report(checks: list[X.Check], out=None) -> bool:
    out = out or sys.stdout
    ok = True
    for c in checks:
        ok &= c.passed
        mark = "ok  " if c.passed else "FAIL"
        print(f"[{mark}] {c.name}" + (f"  ({c.detail})" if c.detail else ""), file=out)
    return ok


def _outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def run_command(command: str, cfg: dict, log=None) -> int:
    """Execute a normalized config; returns the exit code."""
    log = log or sys.stdout
    if command == "sweep-ratio":
        scfg = C.SweepConfig(**cfg)
        out = _outdir(cfg["outputs"]["dir"])
        rows = X.sweep_ratio(scfg)
        write_rows(os.path.join(out, cfg["outputs"]["csv"]), X.RATIO_FIELDS, rows)
        with open(os.path.join(out, cfg["outputs"]["svg"]), "w", encoding="utf-8") as fh:
            fh.write(X.ratio_svg(rows, scfg.k, X.dist_label(scfg.dist)))
        for r in rows:
            print(f"{r.policy} rho={r.rho:g}: ratio_sim={r.ratio_sim:.4f} +- {r.ci_ratio:.4f} "
                  f"bound_I={r.ratio_bound_I:.4f} bound_H={r.ratio_bound_H:.4f} [{r.status}]", file=log)
        checks = X.sweep_checks(rows)
    else:
        out = _outdir(cfg["out"])
        if command == "simulate":
            rows, jobs, checks = X.simulate(cfg)
            write_rows(os.path.join(out, "summary.csv"), X.SUMMARY_FIELDS, rows)
            if jobs is not None:
                write_rows(os.path.join(out, "jobs.csv"), X.JOB_FIELDS, X.job_rows(jobs))
        elif command == "bounds":
            rows, checks = X.bounds(cfg)
            write_rows(os.path.join(out, "bounds.csv"), X.BOUND_FIELDS, rows)
        elif command == "counterexample":
            report, rows, checks = X.counterexample()
            write_rows(os.path.join(out, "counterexample.csv"), X.COUNTER_FIELDS, rows)
            print(f"SRPT-2 third completion: {report['srpt2_third']:g}; "
                  f"alternative schedule third completion: {report['alternative_third']:g}", file=log)
        elif command == "couple":
            viol, summary, checks = X.couple(cfg)
            write_rows(os.path.join(out, "violations.csv"), X.VIOLATION_FIELDS, viol, empty_if_none=True)
            write_rows(os.path.join(out, "summary.csv"), X.COUPLE_SUMMARY_FIELDS, summary)
        elif command == "audit":
            viol, summary, checks = X.audit(cfg)
            write_rows(os.path.join(out, "violations.csv"), X.AUDIT_VIOLATION_FIELDS, viol, empty_if_none=True)
            write_rows(os.path.join(out, "summary.csv"), X.AUDIT_SUMMARY_FIELDS, summary)
        else:
            raise C.ConfigError(f"unknown command {command!r}")
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        fh.write(C.dumps(cfg))
    return 0 if _report(checks, log) else 1


def main(argv: list[str] | None = None) -> int:
    args, rest = _parser().parse_known_args(argv)
    try:
        doc = C.load(args.command, args.config, rest)
        cfg = C.normalize(args.command, doc)
    except (C.ConfigError, OSError, ValueError) as exc:
        print(f"srptk {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        sys.stdout.write(C.dumps(cfg))
        return 0
    t0 = time.perf_counter()
    code = run_command(args.command, cfg)
    print(f"{args.command} finished in {time.perf_counter() - t0:.2f} s, exit {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
