"""Deterministic seed derivation shared by every trainer.

All randomness flows from a master seed through named integer paths, so two
trainers that perform the same logical sequence of operations (e.g. the
self-play baseline and a one-member population with a zero entropy weight)
consume identical random streams.

Stream tags: 0 member init, 1 rollout phase, 2 update shuffle, 3 member
sampling, 4 probe set, 5 partner sampling, 6 seat assignment, 7 evaluation.
"""
from __future__ import annotations

import numpy as np

INIT, ROLLOUT, UPDATE, MEMBER_PICK, PROBE, PARTNER_PICK, SEATS, EVAL = range(8)


def seed_sequence(master: int, *path: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), *[int(p) for p in path]])


def derive_rng(master: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master, *path))


def derive_seed(master: int, *path: int) -> int:
    return int(seed_sequence(master, *path).generate_state(1)[0])


def env_rngs(master: int, *path: int, count: int) -> list[np.random.Generator]:
    """Independent per-worker generators, merged deterministically by index."""
    return [np.random.default_rng(child) for child in seed_sequence(master, *path).spawn(count)]
