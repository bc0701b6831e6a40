"""Cross-play evaluation: fixed-horizon episodes over partners, seeds and seats.

Shaped rewards and bonuses never touch evaluation numbers; a reported reward
is exactly soup_reward times the serves that happened in the episode.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .coopgrid import Action, LayoutSpec, encode_observation, reset, step
from .policy import NetSpec, PolicyParams, forward_batch, sample_actions
from .ppo import ACTIONS, TrainConfig, net_spec_for, train_selfplay


@dataclass(frozen=True)
class EvalSpec:
    layout: LayoutSpec
    agent: PolicyParams
    partners: tuple[tuple[str, PolicyParams], ...]
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    greedy: bool = False  # debugging only; default matches training-time sampling

    def __post_init__(self):
        if not self.partners or not self.seeds:
            raise ValueError("need at least one partner and one seed")


@dataclass
class EvalResult:
    rows: list[dict]              # layout, agent, partner, seat, seed, reward
    per_pairing: dict             # (partner, seat) -> {mean, se, episodes}
    aggregate_mean: float
    per_partner_mean: dict        # partner -> mean over both seats


def play_episode(
    layout: LayoutSpec,
    left: PolicyParams,
    right: PolicyParams,
    seed: int,
    greedy: bool = False,
):
    """One full-horizon episode; returns (task reward, joint-action log)."""
    rngs = seeding.env_rngs(seed, seeding.EVAL, count=2)
    state = reset(layout, seed)
    total = 0.0
    actions_log: list[tuple[int, int]] = []
    for _ in range(layout.horizon):
        obs = np.stack(
            [encode_observation(layout, state, 0), encode_observation(layout, state, 1)]
        )
        if left is right:
            probs, _, _, _ = forward_batch(left, obs)
        else:
            probs_l, _, _, _ = forward_batch(left, obs[:1])
            probs_r, _, _, _ = forward_batch(right, obs[1:])
            probs = np.concatenate([probs_l, probs_r])
        if greedy:
            acts = probs.argmax(axis=1)
        else:
            acts = sample_actions(probs, rngs)
        outcome = step(layout, state, (ACTIONS[acts[0]], ACTIONS[acts[1]]))
        actions_log.append((int(acts[0]), int(acts[1])))
        total += outcome.task_reward
        state = outcome.next_state
    return total, actions_log


def cross_play(spec: EvalSpec) -> EvalResult:
    """Pair the agent with every partner on both seats across all seeds."""
    for name, partner in spec.partners:
        if partner.spec != spec.agent.spec:
            raise ValueError(
                f"partner {name!r} has manifest {partner.spec}, agent has {spec.agent.spec}"
            )
    rows = []
    for name, partner in spec.partners:
        for seat in ("left", "right"):
            for seed in spec.seeds:
                left, right = (
                    (spec.agent, partner) if seat == "left" else (partner, spec.agent)
                )
                reward, _ = play_episode(spec.layout, left, right, seed, spec.greedy)
                rows.append(
                    {
                        "layout": spec.layout.name,
                        "partner": name,
                        "seat": seat,
                        "seed": seed,
                        "reward": reward,
                    }
                )

    per_pairing = {}
    for name, _ in spec.partners:
        for seat in ("left", "right"):
            rewards = np.array(
                [r["reward"] for r in rows if r["partner"] == name and r["seat"] == seat]
            )
            se = (
                float(rewards.std(ddof=1) / np.sqrt(len(rewards)))
                if len(rewards) >= 2
                else None
            )
            per_pairing[(name, seat)] = {
                "mean": float(rewards.mean()),
                "se": se,
                "episodes": int(len(rewards)),
            }
    per_partner = {
        name: float(
            np.mean([per_pairing[(name, "left")]["mean"], per_pairing[(name, "right")]["mean"]])
        )
        for name, _ in spec.partners
    }
    aggregate = float(np.mean([v["mean"] for v in per_pairing.values()]))
    return EvalResult(
        rows=rows,
        per_pairing=per_pairing,
        aggregate_mean=aggregate,
        per_partner_mean=per_partner,
    )


def results_csv_lines(result: EvalResult, agent_label: str = "agent") -> list[str]:
    lines = ["layout,agent,partner,seat,seed,reward"]
    for r in result.rows:
        lines.append(
            f"{r['layout']},{agent_label},{r['partner']},{r['seat']},{r['seed']},{r['reward']}"
        )
    return lines


def summary_dict(result: EvalResult) -> dict:
    return {
        "aggregate_mean": result.aggregate_mean,
        "per_partner_mean": result.per_partner_mean,
        "per_pairing": {
            f"{name}/{seat}": stats for (name, seat), stats in result.per_pairing.items()
        },
    }


def make_holdout_partners(
    layout: LayoutSpec,
    seeds: list[int],
    config: TrainConfig,
    *,
    net_spec: NetSpec | None = None,
    reserved_seeds: tuple[int, ...] = (),
    log_fn=None,
) -> list[tuple[str, PolicyParams]]:
    """Independent self-play agents on held-out seeds, as unseen eval partners."""
    clash = set(seeds) & set(reserved_seeds)
    if clash:
        raise ValueError(f"holdout seeds {sorted(clash)} were already used for training")
    spec = net_spec or net_spec_for(layout)
    partners = []
    for seed in seeds:
        result = train_selfplay(layout, config, seed, net_spec=spec, log_fn=log_fn)
        partners.append((f"holdout_seed{seed}", result.params))
    return partners
