#!/usr/bin/env python3
"""End-to-end zero-shot coordination experiment on one layout.

Trains a population, a robust agent on its frozen checkpoints, a self-play
baseline, and held-out-seed partners; then cross-plays both agents against
the holdouts and prints the comparison table. Everything lands under the
output root as ordinary run directories.

Usage: python scripts/zero_shot_experiment.py [layout] [--profile desk]
"""
import argparse
import sys
from pathlib import Path

from cooplab.cli import main as cli
from cooplab.coopgrid import load_builtin
from cooplab.evaluation import EvalSpec, cross_play
from cooplab.policy import load_params
from cooplab.runio import output_root

TRAIN_SEED = 1
HOLDOUT_SEEDS = (101, 102)


def run(argv=None) -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("layout", nargs="?", default="cramped_room")
    parser.add_argument("--profile", default="desk", choices=("paper", "desk"))
    parser.add_argument("--alpha", type=float, default=0.01)
    parser.add_argument("--beta", type=float, default=3.0)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    out = output_root(args.out)
    base = ["--layout", args.layout, "--profile", args.profile, "--out", str(out)]

    print(f"== population training ({args.layout}, alpha={args.alpha}) ==", flush=True)
    assert cli(["train-mep", *base, "--seed", str(TRAIN_SEED), "--alpha", str(args.alpha)]) == 0
    mep_dir = out / f"mep_{args.layout}_a{args.alpha}_seed{TRAIN_SEED}"

    print("== robust agent against the frozen pool ==", flush=True)
    assert cli(["train-robust", *base, "--seed", str(TRAIN_SEED),
                "--population", str(mep_dir), "--beta", str(args.beta)]) == 0
    robust_dir = out / f"robust_{args.layout}_b{args.beta}_seed{TRAIN_SEED}"

    print("== self-play baseline ==", flush=True)
    assert cli(["train-sp", *base, "--seed", str(TRAIN_SEED)]) == 0

    print("== held-out partners ==", flush=True)
    for seed in HOLDOUT_SEEDS:
        assert cli(["train-sp", *base, "--seed", str(seed)]) == 0

    layout = load_builtin(args.layout)
    partners = tuple(
        (f"holdout_seed{s}",
         load_params(out / f"sp_{args.layout}_seed{s}" / "agent" / "final.ckpt"))
        for s in HOLDOUT_SEEDS
    )
    rows = []
    for label, ckpt in (
        ("population+robust", robust_dir / "agent" / "final.ckpt"),
        ("self-play", out / f"sp_{args.layout}_seed{TRAIN_SEED}" / "agent" / "final.ckpt"),
    ):
        result = cross_play(EvalSpec(layout=layout, agent=load_params(ckpt),
                                     partners=partners))
        rows.append((label, result.aggregate_mean, result.per_partner_mean))

    print(f"\nzero-shot cross-play vs held-out partners on {args.layout}:")
    for label, mean, per_partner in rows:
        detail = "  ".join(f"{k}={v:.1f}" for k, v in per_partner.items())
        print(f"  {label:18s} mean {mean:7.2f}   ({detail})")
    return 0


if __name__ == "__main__":
    sys.exit(run())
