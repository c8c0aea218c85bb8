"""Fit log-log slopes of gap against N for the budget sweeps.

    python3 scripts/rate_table.py [--out results/rates]
"""
import argparse
import os

from dualavg.harness.analysis import rate_fit
from dualavg.harness.config import load_config
from dualavg.harness.runner import run_experiment

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, os.pardir, "configs")
SWEEPS = [("rate_rho2", -1.0), ("rate_rho3", -0.75), ("fixed_rho2", -1.0), ("adaptive_rho2", -1.0)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join("results", "rates"))
    args = ap.parse_args()
    print(f"{'config':<16}{'slope':>9}{'r2':>8}{'theory':>9}")
    for name, theory in SWEEPS:
        cfg = load_config(os.path.join(CONFIGS, name + ".ini"))
        summary = run_experiment(cfg, os.path.join(args.out, name), sweep=True)
        fit = rate_fit(summary)
        print(f"{name:<16}{fit['slope']:>9.3f}{fit['r2']:>8.3f}{theory:>9.2f}")


if __name__ == "__main__":
    main()
