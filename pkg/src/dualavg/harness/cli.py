"""Command line entry point.

    dualavg run <config> [--seed S] [--out DIR] [--workers W] [--trials T]
    dualavg sweep <config> ...
    dualavg certify <run-dir>
    dualavg coverage <run-dir> --alpha A
    dualavg plot <run-dir>

Exit status: 0 on pass, 2 when a check fails, 1 on errors.
"""
from __future__ import annotations

import argparse
import os
import sys

from ..multistage import adaptive_certificate
from .analysis import certify_summary, coverage_check
from .config import ConfigError, load_config
from .plots import emit_plots
from .runner import build_problem, load_summary, run_experiment

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _parser():
    ap = argparse.ArgumentParser(prog="dualavg", description="Dual averaging experiment harness")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        sp = sub.add_parser(name, help=f"{name} an experiment config")
        sp.add_argument("config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--trials", type=int)
    sp = sub.add_parser("certify", help="check a run against its guarantees")
    sp.add_argument("run_dir")
    sp = sub.add_parser("coverage", help="Monte-Carlo coverage of the confidence certificate")
    sp.add_argument("run_dir")
    sp.add_argument("--alpha", type=float, required=True)
    sp = sub.add_parser("plot", help="gap-vs-N plot of a sweep")
    sp.add_argument("run_dir")
    return ap


def _run(args, sweep):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.noise.seed = args.seed
    if args.trials is not None:
        cfg.run.trials = args.trials
    out = args.out or cfg.run.out
    summary = run_experiment(cfg, out, workers=max(1, args.workers), sweep=sweep)
    for pt in summary["points"]:
        st = pt["f_gap"]
        print(f"{pt['label']}: mean gap {st.get('mean', float('nan')):.6g} "
              f"(bound {pt['bound']}) calls {pt['oracle_calls']['mean']:.0f}")
    print(f"wrote {out}")
    return EXIT_OK


def _certify(args):
    checks = certify_summary(load_summary(args.run_dir))
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['check']}: {c['detail']}")
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_FAIL


def _coverage(args):
    summary = load_summary(args.run_dir)
    cfg = load_config(os.path.join(args.run_dir, "config.ini"))
    ok = True
    for pt in summary["points"]:
        if "N" not in pt:
            raise ValueError("coverage needs a budget run")
        prob = build_problem(cfg.at(pt["N"]) if summary["sweep"] else cfg)
        cert = adaptive_certificate(pt["N"], args.alpha, prob.oracle.params, prob.setup)
        res = coverage_check([r["f_gap"] for r in pt["trials"]], cert, args.alpha)
        ok &= res["pass"]
        print(f"{'PASS' if res['pass'] else 'FAIL'} {pt['label']}: {res['violations']} violations, "
              f"rate {res['rate']:.4f} <= {res['threshold']:.4f} (certificate {cert:.6g})")
    return EXIT_OK if ok else EXIT_FAIL


def _plot(args):
    png, csv = emit_plots(load_summary(args.run_dir), args.run_dir)
    print(f"wrote {png} and {csv}")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command in ("run", "sweep"):
            return _run(args, args.command == "sweep")
        if args.command == "certify":
            return _certify(args)
        if args.command == "coverage":
            return _coverage(args)
        return _plot(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
