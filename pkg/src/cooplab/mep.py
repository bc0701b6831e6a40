"""Maximum-entropy population training.

Each iteration samples one member uniformly, lets it self-play against a
copy of itself, adds the centralized population-entropy reward
-alpha * log(mean policy prob of the taken action) on top of the env reward,
and applies a PPO update to that member only. Beginner / middle / best
checkpoints are retained per member and form the partner pool for the
robust-agent stage.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import seeding
from .coopgrid import LayoutSpec
from .policy import NetSpec, PolicyParams, PROB_FLOOR, forward, forward_batch, init_params
from .ppo import (
    AdamState,
    RolloutBatch,
    TrainConfig,
    collect_rollouts,
    desk_profile,
    net_spec_for,
    ppo_update,
)

STAGES = ("beginner", "middle", "best")

PROBE_SET_SIZE = 512
BEST_WINDOW = 10  # trailing iterations for the best-checkpoint statistic


@dataclass(frozen=True)
class MEPConfig:
    population_size: int = 5
    alpha: float = 0.01  # population-entropy reward weight; 0.04 suits the handoff layout
    stages: tuple[str, ...] = STAGES
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


def desk_mep_config(**overrides) -> MEPConfig:
    overrides.setdefault("population_size", 3)
    overrides.setdefault("train", desk_profile())
    return MEPConfig(**overrides)


@dataclass
class Population:
    members: list[PolicyParams]
    checkpoints: list[dict[str, PolicyParams]]  # per member, per stage
    stats: list[dict]                           # per member counters
    history: list[dict] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.members)

    def partner_checkpoints(self) -> list[tuple[str, PolicyParams]]:
        """(label, params) for every member x retained stage."""
        out = []
        for i, stages in enumerate(self.checkpoints):
            for stage in sorted(stages):
                out.append((f"member_{i}/{stage}", stages[stage]))
        return out


def mean_policy_log_prob(members: list[PolicyParams], obs: np.ndarray, action: int) -> float:
    """log of the member-averaged probability of `action` at `obs`, floored."""
    mean_prob = float(
        np.mean([forward(m, obs).action_probs[action] for m in members])
    )
    return float(np.log(max(mean_prob, PROB_FLOOR)))


def entropy_bonus(members: list[PolicyParams], obs: np.ndarray, action: int, alpha: float) -> float:
    """-alpha * log mean-policy prob; nonnegative because probabilities are <= 1."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return -alpha * mean_policy_log_prob(members, obs, action)


def make_entropy_bonus_hook(members: list[PolicyParams], alpha: float, actor_index: int):
    """Batched rollout hook: the actor's own forward pass is reused via `probs`."""

    def hook(obs: np.ndarray, actions: np.ndarray, actor_probs: np.ndarray) -> np.ndarray:
        total = actor_probs.copy()
        for j, member in enumerate(members):
            if j == actor_index:
                continue
            member_probs, _, _, _ = forward_batch(member, obs)
            total += member_probs
        mean_probs = total / len(members)
        picked = mean_probs[np.arange(obs.shape[0]), actions]
        return -alpha * np.log(np.maximum(picked, PROB_FLOOR))

    return hook


def probe_population_entropy(members: list[PolicyParams], probe_obs: np.ndarray) -> float:
    """Population entropy of the mean policy, averaged over a probe set of states."""
    stacked = np.stack([forward_batch(m, probe_obs)[0] for m in members])
    mean_probs = stacked.mean(axis=0)
    per_state = -(mean_probs * np.log(np.maximum(mean_probs, PROB_FLOOR))).sum(axis=1)
    return float(per_state.mean())


def _sample_probe(batch: RolloutBatch, rng: np.random.Generator) -> np.ndarray:
    obs = np.concatenate([t.obs for t in batch.trajectories])
    take = min(PROBE_SET_SIZE, obs.shape[0])
    idx = rng.choice(obs.shape[0], size=take, replace=False)
    return obs[idx]


def train_population(
    layout: LayoutSpec,
    config: MEPConfig,
    seed: int,
    *,
    net_spec: NetSpec | None = None,
    log_fn=None,
) -> Population:
    """Run the population loop until every member's env-step budget is consumed.

    train.total_env_steps is a per-agent budget (n members consume n times as
    many steps overall); shaping and entropy anneals track each member's own
    consumed steps so every member sees the schedule a lone self-play agent
    would. Bit-compatible with the self-play baseline when population_size is
    1 and alpha is 0: member picks, probe sampling and bonus hooks then
    consume separate rng streams or none at all.
    """
    spec = net_spec or net_spec_for(layout)
    train = config.train
    n = config.population_size

    members = [
        init_params(spec, seeding.derive_seed(seed, seeding.INIT, i)) for i in range(n)
    ]
    adams = [AdamState.zeros(m.data.shape[0]) for m in members]
    stats = [
        {
            "updates": 0,
            "env_steps": 0,
            "recent_rewards": [],
            "best_score": -np.inf,
        }
        for _ in range(n)
    ]
    checkpoints: list[dict[str, PolicyParams]] = [{} for _ in range(n)]
    member_rng = seeding.derive_rng(seed, seeding.MEMBER_PICK)
    probe_rng = seeding.derive_rng(seed, seeding.PROBE)
    probe_obs: np.ndarray | None = None

    history = []
    env_steps = 0
    half_budget = n * train.total_env_steps / 2
    middle_taken = False

    for iteration in range(n * train.iterations):
        i = int(member_rng.integers(n))
        hook = (
            make_entropy_bonus_hook(members, config.alpha, actor_index=i)
            if config.alpha > 0
            else None
        )
        member_steps = stats[i]["env_steps"]
        batch = collect_rollouts(
            members[i], members[i], layout, train.iter_timesteps,
            seeding.derive_seed(seed, seeding.ROLLOUT, iteration),
            reward_hook=hook,
            parallel_envs=train.parallel_envs,
            progress=train.shaping_progress(member_steps),
        )
        try:
            members[i], adams[i], report = ppo_update(
                members[i], batch.trajectories, train,
                update_rng=seeding.derive_rng(seed, seeding.UPDATE, iteration),
                adam=adams[i],
                entropy_coef=train.entropy_coef_at(member_steps),
                env_steps=train.iter_timesteps,
            )
        except Exception as exc:
            raise RuntimeError(f"update failed for member {i} at iteration {iteration}") from exc
        env_steps += train.iter_timesteps

        stat = stats[i]
        stat["updates"] += 1
        stat["env_steps"] += train.iter_timesteps
        if np.isfinite(report.mean_episode_reward):
            stat["recent_rewards"] = (stat["recent_rewards"] + [report.mean_episode_reward])[
                -BEST_WINDOW:
            ]
        if stat["updates"] == 1:
            checkpoints[i]["beginner"] = members[i]
        trailing = float(np.mean(stat["recent_rewards"])) if stat["recent_rewards"] else -np.inf
        if trailing > stat["best_score"]:
            stat["best_score"] = trailing
            checkpoints[i]["best"] = members[i]
        if not middle_taken and env_steps >= half_budget:
            for j in range(n):
                checkpoints[j]["middle"] = members[j]
            middle_taken = True

        if probe_obs is None:
            probe_obs = _sample_probe(batch, probe_rng)
        record = {
            "iteration": iteration,
            "member": i,
            "env_steps": env_steps,
            "mean_episode_task_reward": report.mean_episode_reward,
            "mean_entropy": report.mean_entropy,
            "population_entropy": probe_population_entropy(members, probe_obs),
            "policy_loss": report.policy_loss,
            "value_loss": report.value_loss,
        }
        history.append(record)
        if log_fn is not None:
            log_fn(record)

    for i in range(n):  # members a short run never touched still get full stages
        for stage in STAGES:
            checkpoints[i].setdefault(stage, members[i])
    retained = [
        {stage: snap for stage, snap in member.items() if stage in config.stages}
        for member in checkpoints
    ]

    return Population(members=members, checkpoints=retained, stats=stats, history=history)


def alpha_sweep(
    layout: LayoutSpec,
    alphas: list[float],
    config: MEPConfig,
    seeds: list[int],
    *,
    net_spec: NetSpec | None = None,
    log_fn=None,
) -> dict:
    """Best task reward and the population entropy at that point, per alpha and seed."""
    rows = []
    for alpha in alphas:
        for seed in seeds:
            pop = train_population(
                layout, replace(config, alpha=alpha), seed, net_spec=net_spec, log_fn=log_fn
            )
            rewarded = [
                r for r in pop.history if np.isfinite(r["mean_episode_task_reward"])
            ]
            best = max(rewarded, key=lambda r: r["mean_episode_task_reward"], default=None)
            rows.append(
                {
                    "alpha": alpha,
                    "layout": layout.name,
                    "best_reward": best["mean_episode_task_reward"] if best else 0.0,
                    "entropy_at_best": best["population_entropy"] if best else float("nan"),
                    "seed": seed,
                }
            )
    return {"layout": layout.name, "alphas": list(alphas), "seeds": list(seeds), "rows": rows}


def sweep_csv_lines(report: dict) -> list[str]:
    lines = ["alpha,layout,best_reward,entropy_at_best,seed"]
    for row in report["rows"]:
        lines.append(
            f"{row['alpha']},{row['layout']},{row['best_reward']},"
            f"{row['entropy_at_best']},{row['seed']}"
        )
    return lines
