"""Run every shipped config, certify it and plot the sweeps.

    python3 scripts/run_all.py [--out results] [--workers 1]
"""
import argparse
import os
import sys

from dualavg.harness.cli import main as cli
from dualavg.harness.config import load_config

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, os.pardir, "configs")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--workers", default="1")
    args = ap.parse_args()
    status = 0
    for name in sorted(f for f in os.listdir(CONFIGS) if f.endswith(".ini")):
        path = os.path.join(CONFIGS, name)
        cfg = load_config(path)
        out = os.path.join(args.out, name[:-4])
        cmd = "sweep" if cfg.run.sweep else "run"
        print(f"== {name}")
        if cli([cmd, path, "--out", out, "--workers", args.workers]) != 0:
            status = 1
            continue
        if cfg.algorithm.scheme == "adaptive-s":
            rc = cli(["coverage", out, "--alpha", str(cfg.algorithm.alpha or 0.1)])
        else:
            rc = cli(["certify", out])
        status = max(status, rc)
        if cfg.run.sweep:
            cli(["plot", out])
    return status


if __name__ == "__main__":
    sys.exit(main())
