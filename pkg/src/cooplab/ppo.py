"""Clipped-surrogate policy optimization over kitchen rollouts.

One optimization epoch per collected batch: advantages come from GAE over
per-episode trajectories, get normalized across the batch, and a fixed
number of shuffled minibatches is consumed with a globally norm-clipped
Adam step each. Rollouts run a bank of lockstepped environments; both seats
contribute trajectories, and an optional per-seat reward hook adds a bonus
on top of the task and annealed shaped rewards (logged separately).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import seeding
from .coopgrid import Action, LayoutSpec, encode_observation, observation_shape, reset, step
from .policy import (
    NetSpec,
    PolicyParams,
    backward_batch,
    entropy_batch,
    forward_batch,
    init_params,
    sample_actions,
)

ACTIONS = list(Action)


class PPOUpdateError(RuntimeError):
    """Non-finite loss or gradient during an update."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 8e-4
    gamma: float = 0.99
    gae_lambda: float = 0.98
    clip: float = 0.05
    vf_coef: float = 0.1
    max_grad_norm: float = 0.1
    minibatches: int = 10
    minibatch_size: int = 2000
    iter_timesteps: int = 40_000
    parallel_envs: int = 50
    total_env_steps: float = 1.1e7
    shaping_horizon: float = 5e6
    entropy_coef: float = 0.1  # annealed linearly to zero over shaping_horizon
    epochs: int = 1  # optimization epochs per batch; desk runs need > 1 to learn

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.minibatches * self.minibatch_size > self.iter_timesteps:
            raise ValueError("minibatch plan exceeds the per-iteration step budget")

    def entropy_coef_at(self, env_steps: float) -> float:
        return self.entropy_coef * max(0.0, 1.0 - env_steps / self.shaping_horizon)

    def shaping_progress(self, env_steps: float) -> float:
        return min(1.0, env_steps / self.shaping_horizon)

    @property
    def iterations(self) -> int:
        return max(1, int(self.total_env_steps // self.iter_timesteps))


def desk_profile(**overrides) -> TrainConfig:
    """CPU-minute-scale profile.

    Population size, step counts and the minibatch plan keep the full-scale
    ratios; the optimization constants are retuned because a 37-iteration run
    cannot afford full-scale conservatism (tight clip, single epoch, long
    credit horizons) and would not get off the floor with it.
    """
    base = dict(
        total_env_steps=300_000,
        iter_timesteps=8000,
        minibatch_size=400,
        parallel_envs=8,
        shaping_horizon=150_000,
        gamma=0.95,
        gae_lambda=0.9,
        learning_rate=3e-3,
        clip=0.2,
        max_grad_norm=2.0,
        entropy_coef=0.01,
        epochs=4,
    )
    base.update(overrides)
    return TrainConfig(**base)


def net_spec_for(layout: LayoutSpec, profile: str = "paper") -> NetSpec:
    """Network manifest for a layout; the desk profile shrinks the trunk."""
    channels, height, width = observation_shape(layout)
    if profile == "desk":
        return NetSpec(in_channels=channels, height=height, width=width,
                       conv_layers=1, conv_filters=12, hidden_layers=1, hidden_size=64)
    return NetSpec(in_channels=channels, height=height, width=width)


@dataclass
class Trajectory:
    """One episode (or truncated tail) of one seat's experience."""

    obs: np.ndarray            # (T, C, H, W)
    actions: np.ndarray        # (T,)
    log_probs: np.ndarray      # (T,) at collection time
    rewards: np.ndarray        # (T,) training reward: task + annealed shaped + bonus
    task_rewards: np.ndarray   # (T,)
    shaped_rewards: np.ndarray # (T,) annealed shaped component
    bonus_rewards: np.ndarray  # (T,) reward-hook component
    values: np.ndarray         # (T,)
    dones: np.ndarray          # (T,) bool
    bootstrap_value: float     # V(s_{T+1}) when truncated mid-episode, else 0
    seat: int = 0
    env_index: int = 0

    def __post_init__(self):
        if not (np.all(np.isfinite(self.log_probs)) and np.all(np.isfinite(self.rewards))):
            raise ValueError("trajectory log-probs and rewards must be finite")

    def __len__(self) -> int:
        return self.rewards.shape[0]


@dataclass
class RolloutBatch:
    slot_a: list[Trajectory]
    slot_b: list[Trajectory]
    episode_task_returns: list[float]  # completed episodes, env-index order
    env_steps: int
    mean_entropy: float

    @property
    def trajectories(self) -> list[Trajectory]:
        return self.slot_a + self.slot_b


@dataclass
class UpdateReport:
    mean_episode_reward: float
    policy_loss: float
    value_loss: float
    mean_entropy: float
    grad_norm: float
    steps: int


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size))


def clip_gradient(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    """Globally norm-clip a flat gradient; returns (clipped, norm before clipping)."""
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


def adam_step(state: AdamState, grad: np.ndarray, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grad
    v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    delta = -lr * m_hat / (np.sqrt(v_hat) + eps)
    return delta, AdamState(m=m, v=v, t=t)


def compute_advantages(traj: Trajectory, config: TrainConfig):
    """Raw GAE(gamma, lambda) advantages and returns-to-go for one trajectory."""
    n = len(traj)
    adv = np.zeros(n)
    carried = 0.0
    for t in reversed(range(n)):
        nonterminal = 0.0 if traj.dones[t] else 1.0
        next_value = traj.values[t + 1] if t + 1 < n else traj.bootstrap_value
        delta = traj.rewards[t] + config.gamma * next_value * nonterminal - traj.values[t]
        carried = delta + config.gamma * config.gae_lambda * nonterminal * carried
        adv[t] = carried
    return adv, adv + traj.values


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    centered = adv - adv.mean()
    std = centered.std()
    if std > 1e-8:
        centered = centered / std
    return centered


# ---------------------------------------------------------------------------
# rollout collection
# ---------------------------------------------------------------------------


class _SeatRecorder:
    """Accumulates one seat's per-step records and slices them into episodes."""

    def __init__(self, seat_label: int, env_index: int):
        self.seat_label = seat_label
        self.env_index = env_index
        self.clear()

    def clear(self):
        self.obs, self.actions, self.log_probs = [], [], []
        self.rewards, self.task, self.shaped, self.bonus = [], [], [], []
        self.values, self.dones = [], []

    def push(self, obs, action, log_prob, reward, task, shaped, bonus, value, done):
        self.obs.append(obs)
        self.actions.append(action)
        self.log_probs.append(log_prob)
        self.rewards.append(reward)
        self.task.append(task)
        self.shaped.append(shaped)
        self.bonus.append(bonus)
        self.values.append(value)
        self.dones.append(done)

    def emit(self, bootstrap_value: float) -> Trajectory:
        traj = Trajectory(
            obs=np.stack(self.obs),
            actions=np.asarray(self.actions, dtype=np.int64),
            log_probs=np.asarray(self.log_probs),
            rewards=np.asarray(self.rewards),
            task_rewards=np.asarray(self.task),
            shaped_rewards=np.asarray(self.shaped),
            bonus_rewards=np.asarray(self.bonus),
            values=np.asarray(self.values),
            dones=np.asarray(self.dones, dtype=bool),
            bootstrap_value=bootstrap_value,
            seat=self.seat_label,
            env_index=self.env_index,
        )
        self.clear()
        return traj


def collect_rollouts(
    left: PolicyParams,
    right: PolicyParams,
    layout: LayoutSpec,
    steps: int,
    seed: int,
    reward_hook=None,
    *,
    parallel_envs: int = 8,
    progress: float = 0.0,
    randomize_seats: bool = False,
    shaped_rewards: bool = True,
) -> RolloutBatch:
    """Run lockstepped environments with `left`/`right` policies on the two slots.

    Slot A plays seat 0 and slot B seat 1 unless randomize_seats is set, in
    which case each environment redraws slot A's seat every episode.
    `reward_hook(obs_batch, actions, actor_probs) -> bonus array` is evaluated
    once per tick over both slots and added to the training reward only.
    Deterministic for a fixed seed and worker count.
    """
    if steps % parallel_envs != 0:
        raise ValueError("steps must be divisible by parallel_envs")
    ticks = steps // parallel_envs
    n = parallel_envs
    same_params = left is right

    action_rngs = seeding.env_rngs(seed, seeding.ROLLOUT, count=2 * n)
    seat_rng = seeding.derive_rng(seed, seeding.SEATS)
    seat_of_a = np.array(
        [seat_rng.integers(2) if randomize_seats else 0 for _ in range(n)], dtype=np.int64
    )

    states = [reset(layout, seed) for _ in range(n)]
    recorders_a = [_SeatRecorder(int(seat_of_a[i]), i) for i in range(n)]
    recorders_b = [_SeatRecorder(1 - int(seat_of_a[i]), i) for i in range(n)]
    trajectories_a: list[Trajectory] = []
    trajectories_b: list[Trajectory] = []
    episode_returns: list[float] = []
    episode_task_acc = np.zeros(n)
    entropy_sum, entropy_count = 0.0, 0

    def seat_obs(seats: np.ndarray) -> np.ndarray:
        return np.stack(
            [encode_observation(layout, states[i], int(seats[i])) for i in range(n)]
        )

    for _ in range(ticks):
        obs_a = seat_obs(seat_of_a)
        obs_b = seat_obs(1 - seat_of_a)
        if same_params:
            probs_all, logps_all, values_all, _ = forward_batch(
                left, np.concatenate([obs_a, obs_b])
            )
            probs_a, probs_b = probs_all[:n], probs_all[n:]
            logps_a, logps_b = logps_all[:n], logps_all[n:]
            values_a, values_b = values_all[:n], values_all[n:]
        else:
            probs_a, logps_a, values_a, _ = forward_batch(left, obs_a)
            probs_b, logps_b, values_b, _ = forward_batch(right, obs_b)

        acts_a = sample_actions(probs_a, action_rngs[:n])
        acts_b = sample_actions(probs_b, action_rngs[n:])
        entropy_sum += float(entropy_batch(probs_a).sum() + entropy_batch(probs_b).sum())
        entropy_count += 2 * n

        bonus_a = np.zeros(n)
        bonus_b = np.zeros(n)
        if reward_hook is not None:
            merged = reward_hook(
                np.concatenate([obs_a, obs_b]),
                np.concatenate([acts_a, acts_b]),
                np.concatenate([probs_a, probs_b]),
            )
            bonus_a = np.asarray(merged[:n], dtype=float)
            bonus_b = np.asarray(merged[n:], dtype=float)

        anneal = max(0.0, 1.0 - progress) if shaped_rewards else 0.0
        for i in range(n):
            joint = [None, None]
            joint[int(seat_of_a[i])] = ACTIONS[acts_a[i]]
            joint[1 - int(seat_of_a[i])] = ACTIONS[acts_b[i]]
            outcome = step(layout, states[i], tuple(joint))
            shaped = outcome.shaped_reward * anneal
            env_reward = outcome.task_reward + shaped
            recorders_a[i].push(
                obs_a[i], acts_a[i], logps_a[i, acts_a[i]], env_reward + bonus_a[i],
                outcome.task_reward, shaped, bonus_a[i], values_a[i], outcome.done,
            )
            recorders_b[i].push(
                obs_b[i], acts_b[i], logps_b[i, acts_b[i]], env_reward + bonus_b[i],
                outcome.task_reward, shaped, bonus_b[i], values_b[i], outcome.done,
            )
            episode_task_acc[i] += outcome.task_reward
            if outcome.done:
                trajectories_a.append(recorders_a[i].emit(0.0))
                trajectories_b.append(recorders_b[i].emit(0.0))
                episode_returns.append(float(episode_task_acc[i]))
                episode_task_acc[i] = 0.0
                states[i] = reset(layout, seed)
                if randomize_seats:
                    seat_of_a[i] = seat_rng.integers(2)
                    recorders_a[i].seat_label = int(seat_of_a[i])
                    recorders_b[i].seat_label = 1 - int(seat_of_a[i])
            else:
                states[i] = outcome.next_state

    # bootstrap values for truncated tails
    if any(len(r.rewards) for r in recorders_a):
        obs_a = seat_obs(seat_of_a)
        obs_b = seat_obs(1 - seat_of_a)
        if same_params:
            _, _, values_all, _ = forward_batch(left, np.concatenate([obs_a, obs_b]))
            tail_values_a, tail_values_b = values_all[:n], values_all[n:]
        else:
            _, _, tail_values_a, _ = forward_batch(left, obs_a)
            _, _, tail_values_b, _ = forward_batch(right, obs_b)
        for i in range(n):
            if len(recorders_a[i].rewards):
                trajectories_a.append(recorders_a[i].emit(float(tail_values_a[i])))
                trajectories_b.append(recorders_b[i].emit(float(tail_values_b[i])))

    return RolloutBatch(
        slot_a=trajectories_a,
        slot_b=trajectories_b,
        episode_task_returns=episode_returns,
        env_steps=steps,
        mean_entropy=entropy_sum / max(1, entropy_count),
    )


# ---------------------------------------------------------------------------
# the update
# ---------------------------------------------------------------------------


def _assemble(batch: list[Trajectory], config: TrainConfig):
    advantages, returns = [], []
    for traj in batch:
        adv, ret = compute_advantages(traj, config)
        advantages.append(adv)
        returns.append(ret)
    return (
        np.concatenate([t.obs for t in batch]),
        np.concatenate([t.actions for t in batch]),
        np.concatenate([t.log_probs for t in batch]),
        normalize_advantages(np.concatenate(advantages)),
        np.concatenate(returns),
    )


def _minibatch_grad(params, obs, actions, old_logp, adv, ret, clip, vf_coef, ent_coef):
    m = obs.shape[0]
    probs, logps, values, cache = forward_batch(params, obs)
    idx = np.arange(m)
    new_p = probs[idx, actions]
    old_p = np.exp(old_logp)
    ratio = new_p / old_p
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    surrogate = np.minimum(unclipped, clipped)
    active = unclipped <= clipped  # unclipped branch drives the gradient

    entropies = entropy_batch(probs)
    policy_loss = float(-surrogate.mean())
    value_loss = float(((values - ret) ** 2).mean())
    loss = policy_loss + vf_coef * value_loss - ent_coef * float(entropies.mean())

    dprobs = ent_coef * (logps + 1.0) / m  # from the entropy bonus
    dprobs[idx, actions] -= np.where(active, adv / old_p, 0.0) / m
    dvalues = vf_coef * 2.0 * (values - ret) / m

    if not np.isfinite(loss):
        raise PPOUpdateError("non-finite loss")
    grad = backward_batch(params, cache, dprobs, dvalues)
    return grad, loss, policy_loss, value_loss, float(entropies.mean())


def ppo_update(
    params: PolicyParams,
    batch: list[Trajectory],
    config: TrainConfig,
    *,
    update_rng: np.random.Generator,
    adam: AdamState | None = None,
    entropy_coef: float | None = None,
    env_steps: int | None = None,
):
    """One epoch of clipped-surrogate updates over shuffled minibatches.

    Returns (new params, new adam state, UpdateReport). The minibatch plan
    subsamples `minibatches * minibatch_size` of the collected steps.
    """
    need = config.minibatches * config.minibatch_size
    total = sum(len(t) for t in batch)
    if total < need:
        raise ValueError(f"batch holds {total} steps, need >= {need}")
    if adam is None:
        adam = AdamState.zeros(params.data.shape[0])
    ent_coef = config.entropy_coef if entropy_coef is None else entropy_coef

    obs, actions, old_logp, adv, ret = _assemble(batch, config)

    losses, policy_losses, value_losses, entropies, norms = [], [], [], [], []
    data = params.data
    for epoch in range(config.epochs):
        order = update_rng.permutation(total)[:need]
        for k in range(config.minibatches):
            sel = order[k * config.minibatch_size : (k + 1) * config.minibatch_size]
            current = PolicyParams(spec=params.spec, data=data)
            try:
                grad, loss, ploss, vloss, ment = _minibatch_grad(
                    current, obs[sel], actions[sel], old_logp[sel], adv[sel], ret[sel],
                    config.clip, config.vf_coef, ent_coef,
                )
            except (PPOUpdateError, FloatingPointError) as exc:
                raise PPOUpdateError(
                    f"update aborted at epoch {epoch} minibatch {k}: {exc}"
                ) from exc
            grad, norm = clip_gradient(grad, config.max_grad_norm)
            norms.append(norm)
            delta, adam = adam_step(adam, grad, config.learning_rate)
            data = data + delta
            losses.append(loss)
            policy_losses.append(ploss)
            value_losses.append(vloss)
            entropies.append(ment)

    completed = [t for t in batch if len(t) and t.dones[-1]]
    mean_episode = (
        float(np.mean([t.task_rewards.sum() for t in completed])) if completed else float("nan")
    )
    report = UpdateReport(
        mean_episode_reward=mean_episode,
        policy_loss=float(np.mean(policy_losses)),
        value_loss=float(np.mean(value_losses)),
        mean_entropy=float(np.mean(entropies)),
        grad_norm=float(np.mean(norms)),
        steps=int(env_steps if env_steps is not None else total),
    )
    return PolicyParams(spec=params.spec, data=data), adam, report


# ---------------------------------------------------------------------------
# self-play baseline
# ---------------------------------------------------------------------------


class StageTracker:
    """Retains beginner (first update), middle (half budget), best (trailing
    mean of recent iteration rewards) and final parameter snapshots."""

    WINDOW = 10

    def __init__(self, total_env_steps: float):
        self.half_budget = total_env_steps / 2
        self.recent: list[float] = []
        self.best_score = -np.inf
        self.checkpoints: dict[str, PolicyParams] = {}

    def observe(self, params: PolicyParams, mean_episode_reward: float, env_steps: int):
        self.checkpoints.setdefault("beginner", params)
        if "middle" not in self.checkpoints and env_steps >= self.half_budget:
            self.checkpoints["middle"] = params
        if np.isfinite(mean_episode_reward):
            self.recent = (self.recent + [mean_episode_reward])[-self.WINDOW :]
        trailing = float(np.mean(self.recent)) if self.recent else -np.inf
        if trailing > self.best_score:
            self.best_score = trailing
            self.checkpoints["best"] = params

    def finalize(self, params: PolicyParams) -> dict[str, PolicyParams]:
        self.checkpoints["final"] = params
        for stage in ("beginner", "middle", "best"):
            self.checkpoints.setdefault(stage, params)
        return self.checkpoints


@dataclass
class TrainResult:
    params: PolicyParams
    history: list[dict] = field(default_factory=list)
    checkpoints: dict[str, PolicyParams] = field(default_factory=dict)


def train_selfplay(
    layout: LayoutSpec,
    config: TrainConfig,
    seed: int,
    *,
    net_spec: NetSpec | None = None,
    log_fn=None,
) -> TrainResult:
    """Plain self-play baseline: one policy plays both seats of its own copy."""
    spec = net_spec or net_spec_for(layout)
    params = init_params(spec, seeding.derive_seed(seed, seeding.INIT, 0))
    adam = AdamState.zeros(params.data.shape[0])
    stages = StageTracker(config.total_env_steps)
    history = []
    env_steps = 0
    for iteration in range(config.iterations):
        batch = collect_rollouts(
            params, params, layout, config.iter_timesteps,
            seeding.derive_seed(seed, seeding.ROLLOUT, iteration),
            parallel_envs=config.parallel_envs,
            progress=config.shaping_progress(env_steps),
        )
        params, adam, report = ppo_update(
            params, batch.trajectories, config,
            update_rng=seeding.derive_rng(seed, seeding.UPDATE, iteration),
            adam=adam,
            entropy_coef=config.entropy_coef_at(env_steps),
            env_steps=config.iter_timesteps,
        )
        env_steps += config.iter_timesteps
        stages.observe(params, report.mean_episode_reward, env_steps)
        record = {
            "iteration": iteration,
            "env_steps": env_steps,
            "mean_episode_task_reward": report.mean_episode_reward,
            "mean_entropy": report.mean_entropy,
            "policy_loss": report.policy_loss,
            "value_loss": report.value_loss,
            "grad_norm": report.grad_norm,
        }
        history.append(record)
        if log_fn is not None:
            log_fn(record)
    return TrainResult(params=params, history=history, checkpoints=stages.finalize(params))
