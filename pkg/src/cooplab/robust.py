"""Robust-agent training against a frozen partner pool.

Partners are ranked by how hard they currently are (running return estimate
J, rank of 1/J), sampled with probability proportional to rank^beta, and the
learner alone receives PPO updates while its seat is re-randomized every
episode. Driving beta up concentrates play on the current worst pairing,
pushing the minimum-over-pool return upward.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import seeding
from .coopgrid import LayoutSpec
from .evaluation import play_episode
from .mep import Population
from .policy import NetSpec, PolicyParams, init_params
from .ppo import AdamState, TrainConfig, collect_rollouts, net_spec_for, ppo_update

EMA_COEF = 0.95
BEST_WINDOW = 10


@dataclass(frozen=True)
class PartnerPool:
    partners: tuple[PolicyParams, ...]
    labels: tuple[str, ...]
    returns: np.ndarray        # running J per partner; NaN until first episode
    episode_counts: np.ndarray

    def __post_init__(self):
        if len(self.partners) == 0:
            raise ValueError("partner pool must not be empty")
        if not (len(self.partners) == len(self.labels) == len(self.returns)):
            raise ValueError("pool fields must align")

    @property
    def size(self) -> int:
        return len(self.partners)

    @classmethod
    def from_checkpoints(cls, checkpoints: list[tuple[str, PolicyParams]]) -> "PartnerPool":
        labels, partners = zip(*checkpoints)
        n = len(partners)
        return cls(
            partners=tuple(partners),
            labels=tuple(labels),
            returns=np.full(n, np.nan),
            episode_counts=np.zeros(n, dtype=np.int64),
        )

    @classmethod
    def from_population(cls, population: Population) -> "PartnerPool":
        return cls.from_checkpoints(population.partner_checkpoints())


def update_return_estimate(pool: PartnerPool, index: int, episode_return: float) -> PartnerPool:
    """EMA(0.95) of episode task returns, warm-started at the first value."""
    if not np.isfinite(episode_return):
        raise ValueError("episode return must be finite")
    returns = pool.returns.copy()
    counts = pool.episode_counts.copy()
    if counts[index] == 0:
        returns[index] = episode_return
    else:
        returns[index] = EMA_COEF * returns[index] + (1 - EMA_COEF) * episode_return
    counts[index] += 1
    return replace(pool, returns=returns, episode_counts=counts)


@dataclass(frozen=True)
class PriorityTable:
    beta: float
    ranks: np.ndarray          # permutation of 1..n; n = hardest partner
    probabilities: np.ndarray  # rank^beta, normalized

    def __post_init__(self):
        n = len(self.ranks)
        if sorted(self.ranks.tolist()) != list(range(1, n + 1)):
            raise ValueError("ranks must be a permutation of 1..n")
        if abs(self.probabilities.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")


def compute_priorities(pool: PartnerPool, beta: float) -> PriorityTable:
    """Rank 1/J, hardest partner (smallest J) gets rank n and the largest weight.

    Unvisited partners count as hardest; ties break by partner index.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    n = pool.size
    keys = np.where(np.isnan(pool.returns), -np.inf, pool.returns)
    order = np.lexsort((np.arange(n), keys))  # ascending J, ties by index
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(n, 0, -1)
    weights = ranks.astype(float) ** beta
    return PriorityTable(beta=beta, ranks=ranks, probabilities=weights / weights.sum())


def sample_partner(table: PriorityTable, rng: np.random.Generator) -> int:
    cum = np.cumsum(table.probabilities)
    return int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))


@dataclass
class RobustResult:
    params: PolicyParams
    pool: PartnerPool
    history: list[dict] = field(default_factory=list)
    priorities_log: list[dict] = field(default_factory=list)
    checkpoints: dict[str, PolicyParams] = field(default_factory=dict)


def train_robust_agent(
    pool: PartnerPool,
    layout: LayoutSpec,
    config: TrainConfig,
    seed: int,
    *,
    beta: float = 3.0,
    net_spec: NetSpec | None = None,
    log_fn=None,
) -> RobustResult:
    """Train the cooperating agent against the frozen pool with rank sampling."""
    spec = net_spec or net_spec_for(layout)
    fingerprints = [p.data.tobytes() for p in pool.partners]
    params = init_params(spec, seeding.derive_seed(seed, seeding.INIT, 0))
    adam = AdamState.zeros(params.data.shape[0])
    partner_rng = seeding.derive_rng(seed, seeding.PARTNER_PICK)

    history: list[dict] = []
    priorities_log: list[dict] = []
    checkpoints: dict[str, PolicyParams] = {}
    recent: list[float] = []
    best_score = -np.inf
    env_steps = 0
    half_budget = config.total_env_steps / 2

    for phase in range(config.iterations):
        table = compute_priorities(pool, beta)
        if phase < pool.size:
            partner = phase  # round-robin warmup visits everyone once
        else:
            partner = sample_partner(table, partner_rng)
        priorities_log.append(
            {
                "phase": phase,
                "partner": partner,
                "returns": [None if np.isnan(v) else float(v) for v in pool.returns],
                "probabilities": table.probabilities.tolist(),
            }
        )

        batch = collect_rollouts(
            params, pool.partners[partner], layout, config.iter_timesteps,
            seeding.derive_seed(seed, seeding.ROLLOUT, phase),
            parallel_envs=config.parallel_envs,
            progress=config.shaping_progress(env_steps),
            randomize_seats=True,
        )
        for episode_return in batch.episode_task_returns:
            pool = update_return_estimate(pool, partner, episode_return)

        params, adam, report = ppo_update(
            params, batch.slot_a, config,
            update_rng=seeding.derive_rng(seed, seeding.UPDATE, phase),
            adam=adam,
            entropy_coef=config.entropy_coef_at(env_steps),
            env_steps=config.iter_timesteps,
        )
        env_steps += config.iter_timesteps

        if phase == 0:
            checkpoints["beginner"] = params
        if "middle" not in checkpoints and env_steps >= half_budget:
            checkpoints["middle"] = params
        if np.isfinite(report.mean_episode_reward):
            recent = (recent + [report.mean_episode_reward])[-BEST_WINDOW:]
        trailing = float(np.mean(recent)) if recent else -np.inf
        if trailing > best_score:
            best_score = trailing
            checkpoints["best"] = params

        record = {
            "phase": phase,
            "partner": int(partner),
            "partner_label": pool.labels[partner],
            "env_steps": env_steps,
            "mean_episode_task_reward": report.mean_episode_reward,
            "mean_entropy": report.mean_entropy,
            "policy_loss": report.policy_loss,
            "value_loss": report.value_loss,
        }
        history.append(record)
        if log_fn is not None:
            log_fn(record)

    checkpoints["final"] = params
    checkpoints.setdefault("beginner", params)
    checkpoints.setdefault("middle", params)
    checkpoints.setdefault("best", params)

    for before, partner in zip(fingerprints, pool.partners):
        if partner.data.tobytes() != before:
            raise RuntimeError("frozen partner parameters were modified during training")

    return RobustResult(
        params=params,
        pool=pool,
        history=history,
        priorities_log=priorities_log,
        checkpoints=checkpoints,
    )


def minimax_report(
    agent: PolicyParams,
    pool: PartnerPool,
    layout: LayoutSpec,
    episodes_per_partner: int = 10,
    *,
    seed: int = 0,
    greedy: bool = False,
) -> dict:
    """Mean return per partner and the worst pairing over the pool.

    Episodes split across both seat orders; the reported minimum is the
    worst-case floor C that the corollary bound consumes.
    """
    if episodes_per_partner < 10:
        raise ValueError("need at least 10 episodes per partner")
    per_partner = []
    for idx, (label, partner) in enumerate(zip(pool.labels, pool.partners)):
        rewards = []
        for ep in range(episodes_per_partner):
            ep_seed = seeding.derive_seed(seed, seeding.EVAL, idx, ep)
            if ep % 2 == 0:
                reward, _ = play_episode(layout, agent, partner, ep_seed, greedy)
            else:
                reward, _ = play_episode(layout, partner, agent, ep_seed, greedy)
            rewards.append(reward)
        per_partner.append(
            {
                "partner": label,
                "mean_return": float(np.mean(rewards)),
                "episodes": episodes_per_partner,
            }
        )
    worst = min(per_partner, key=lambda row: row["mean_return"])
    return {
        "layout": layout.name,
        "horizon": layout.horizon,
        "per_partner": per_partner,
        "min_return": worst["mean_return"],
        "hardest_partner": worst["partner"],
    }
