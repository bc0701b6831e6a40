#!/usr/bin/env python3
"""Run the numerical verification suites at full scale and save the report.

Checks, over randomized instances: the diversity >= n^2 * population-entropy
bound with its identical-members equality case, the JSD decomposition
identity, and the (1 +/- eps)^T return envelope with its worst-case floor on
exhaustively enumerated tiny MDPs.

Usage: python scripts/theory_lab.py [--trials 10000] [--mdp-trials 1000]
"""
import argparse
import sys

from cooplab.cli import main as cli


def run(argv=None) -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--trials", type=int, default=10_000)
    parser.add_argument("--mdp-trials", type=int, default=1_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    argv_out = ["verify-bounds", "--trials", str(args.trials),
                "--mdp-trials", str(args.mdp_trials), "--bounds-seed", str(args.seed)]
    if args.out:
        argv_out += ["--out", args.out]
    return cli(argv_out)


if __name__ == "__main__":
    sys.exit(run())
