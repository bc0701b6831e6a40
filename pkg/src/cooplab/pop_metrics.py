"""Population diversity and entropy numerics, plus enumeration oracles.

Covers the diversity sum (pairwise cross-entropies plus individual
entropies), the population entropy of the mean policy and its n^2 lower-bound
margin, the JSD-plus-mean-entropy decomposition, epsilon-closeness between
tabular policies, exact expected returns on enumerable two-player MDPs, and
the (1 +/- eps)^T return envelope with its worst-case floor.

All logs are natural; probabilities are floored at PROB_FLOOR (shared with
the policy network) before any log.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .policy import PROB_FLOOR


class UndefinedClosenessError(ValueError):
    """Reference policy has a zero where a ratio is required."""


class EnumerationTooLarge(ValueError):
    """Trajectory enumeration would exceed the configured budget."""


@dataclass(frozen=True)
class PopulationSnapshot:
    """n action distributions (rows) observed at one state."""

    members: np.ndarray  # (n, actions)

    def __post_init__(self):
        m = self.members
        if m.ndim != 2 or m.shape[0] < 1:
            raise ValueError("members must be a (n, actions) array with n >= 1")
        if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("members must be distributions summing to 1 within 1e-9")

    @property
    def n(self) -> int:
        return self.members.shape[0]


def clamp_distribution(p: np.ndarray, floor: float = PROB_FLOOR) -> np.ndarray:
    """Floor entries at `floor` and renormalize, keeping a valid distribution."""
    q = np.maximum(np.asarray(p, dtype=float), floor)
    return q / q.sum(axis=-1, keepdims=True)


def _log_floored(p: np.ndarray, floor: float) -> np.ndarray:
    return np.log(np.maximum(p, floor))


def cross_entropy(p: np.ndarray, q: np.ndarray, floor: float = PROB_FLOOR) -> float:
    """-sum_a p(a) log q(a), with q floored so the value stays finite."""
    return float(-(np.asarray(p) * _log_floored(np.asarray(q), floor)).sum())


def entropy_of(p: np.ndarray, floor: float = PROB_FLOOR) -> float:
    return cross_entropy(p, p, floor)


def population_diversity(pop: PopulationSnapshot, floor: float = PROB_FLOOR) -> float:
    """Sum of all pairwise cross-entropies plus all individual entropies.

    The i = j diagonal of the full double sum is exactly the entropy term, so
    the whole quantity is -sum_a (sum_i p_i(a)) (sum_j log p_j(a)).
    """
    m = pop.members
    return float(-(m.sum(axis=0) * _log_floored(m, floor).sum(axis=0)).sum())


def mean_policy(pop: PopulationSnapshot) -> np.ndarray:
    return pop.members.mean(axis=0)


def population_entropy(pop: PopulationSnapshot, floor: float = PROB_FLOOR) -> float:
    """Entropy of the mean of all member policies."""
    return entropy_of(mean_policy(pop), floor)


def theorem1_margin(pop: PopulationSnapshot, floor: float = PROB_FLOOR) -> float:
    """Diversity minus n^2 times population entropy; nonnegative for clamped members."""
    return population_diversity(pop, floor) - pop.n**2 * population_entropy(pop, floor)


def jsd_decomposition(pop: PopulationSnapshot, floor: float = PROB_FLOOR) -> tuple[float, float]:
    """(jsd, mean individual entropy); their sum equals the population entropy."""
    m = pop.members
    mean = mean_policy(pop)
    log_members = _log_floored(m, floor)
    jsd = float((m * (log_members - _log_floored(mean, floor))).sum() / pop.n)
    mean_entropy = float(-(m * log_members).sum() / pop.n)
    return jsd, mean_entropy


# ---------------------------------------------------------------------------
# enumerable two-player MDPs
# ---------------------------------------------------------------------------

MAX_TRAJECTORIES = 10_000_000


@dataclass(frozen=True)
class TinyMDP:
    transitions: np.ndarray  # (S, A1, A2, S); rows sum to 1
    rewards: np.ndarray      # (S, A1, A2)
    horizon: int
    initial: np.ndarray      # (S,)

    def __post_init__(self):
        s, a1, a2, s2 = self.transitions.shape
        if s != s2 or s > 8:
            raise ValueError("state count must match and stay <= 8")
        if self.horizon < 1 or self.horizon > 6:
            raise ValueError("horizon must be in 1..6")
        if self.rewards.shape != (s, a1, a2):
            raise ValueError("rewards must be (S, A1, A2)")
        if np.any(np.abs(self.transitions.sum(axis=3) - 1.0) > 1e-9):
            raise ValueError("transition rows must sum to 1")
        if np.any(np.abs(self.initial.sum() - 1.0) > 1e-9) or np.any(self.initial < 0):
            raise ValueError("initial distribution must be valid")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> tuple[int, int]:
        return self.transitions.shape[1], self.transitions.shape[2]


@dataclass(frozen=True)
class ReturnEstimate:
    J: float
    method: str  # "exhaustive" or "monte-carlo(<episodes>)"
    se: float | None = None


def _check_policy(mdp: TinyMDP, policy: np.ndarray, seat: int) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    expected = (mdp.n_states, mdp.n_actions[seat])
    if policy.shape != expected:
        raise ValueError(f"seat {seat} policy must have shape {expected}")
    return policy


def exhaustive_return(mdp: TinyMDP, left: np.ndarray, right: np.ndarray) -> ReturnEstimate:
    """Exact expected sum of rewards by enumerating every trajectory.

    The frontier of (state, probability, return-so-far) triples is expanded
    one step at a time over all joint actions and transition branches;
    zero-probability branches are pruned as they appear.
    """
    left = _check_policy(mdp, left, 0)
    right = _check_policy(mdp, right, 1)
    a1, a2 = mdp.n_actions
    branching = int((mdp.transitions > 0).sum(axis=3).max())
    worst = (a1 * a2 * branching) ** mdp.horizon
    if worst > MAX_TRAJECTORIES:
        raise EnumerationTooLarge(
            f"{worst} trajectories ((|A1|*|A2|*branching)^T = "
            f"({a1}*{a2}*{branching})^{mdp.horizon}) exceed the {MAX_TRAJECTORIES} budget"
        )

    states = np.nonzero(mdp.initial)[0]
    probs = mdp.initial[states].astype(float)
    returns = np.zeros_like(probs)
    for _ in range(mdp.horizon):
        next_states, next_probs, next_returns = [], [], []
        for u in range(a1):
            for v in range(a2):
                w = probs * left[states, u] * right[states, v]
                keep = w > 0
                if not np.any(keep):
                    continue
                src = states[keep]
                branch = mdp.transitions[src, u, v, :]  # (k, S)
                expanded = w[keep][:, None] * branch
                gained = returns[keep] + mdp.rewards[src, u, v]
                rows, cols = np.nonzero(expanded)
                next_states.append(cols)
                next_probs.append(expanded[rows, cols])
                next_returns.append(gained[rows])
        states = np.concatenate(next_states)
        probs = np.concatenate(next_probs)
        returns = np.concatenate(next_returns)
    return ReturnEstimate(J=float(np.dot(probs, returns)), method="exhaustive")


def _draw_rows(rng: np.random.Generator, table: np.ndarray) -> np.ndarray:
    """One categorical draw per row of a (N, K) probability table."""
    cum = np.cumsum(table, axis=1)
    u = rng.random(table.shape[0])[:, None] * cum[:, -1:]
    return (u >= cum).sum(axis=1)


def monte_carlo_return(
    mdp: TinyMDP, left: np.ndarray, right: np.ndarray, episodes: int, rng: np.random.Generator
) -> ReturnEstimate:
    """Sampled expected return with a standard error, for oracle cross-checks."""
    left = _check_policy(mdp, left, 0)
    right = _check_policy(mdp, right, 1)
    totals = np.zeros(episodes)
    states = _draw_rows(rng, np.tile(mdp.initial, (episodes, 1)))
    for _ in range(mdp.horizon):
        u = _draw_rows(rng, left[states])
        v = _draw_rows(rng, right[states])
        totals += mdp.rewards[states, u, v]
        states = _draw_rows(rng, mdp.transitions[states, u, v])
    se = float(totals.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else None
    return ReturnEstimate(J=float(totals.mean()), method=f"monte-carlo({episodes})", se=se)


def epsilon_closeness(p1: np.ndarray, p2: np.ndarray, mdp: TinyMDP | None = None) -> float:
    """max over (state, action) of |p1/p2 - 1|; p2 must be strictly positive."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if p1.shape != p2.shape:
        raise ValueError("policies must share a shape")
    if np.any(p2 <= 0):
        raise UndefinedClosenessError(
            "reference policy has a zero probability; closeness is undefined"
        )
    return float(np.abs(p1 / p2 - 1.0).max())


@dataclass(frozen=True)
class Bounds:
    lower: float
    upper: float
    degenerate: bool = False  # eps >= 1 floors the lower bound at zero


def return_bounds(j_ref: float, eps: float, horizon: int) -> Bounds:
    """((1-eps)^T, (1+eps)^T) envelope around a reference return."""
    if eps < 0 or horizon < 1 or j_ref < 0:
        raise ValueError("need eps >= 0, horizon >= 1 and a nonnegative reference return")
    upper = (1.0 + eps) ** horizon * j_ref
    if eps >= 1.0:
        return Bounds(lower=0.0, upper=upper, degenerate=True)
    return Bounds(lower=(1.0 - eps) ** horizon * j_ref, upper=upper)


def corollary_bound(c: float, eps: float, horizon: int) -> float:
    """Worst-case-floor C(1-eps)^T for any eps-close held-out partner."""
    return return_bounds(c, eps, horizon).lower


# ---------------------------------------------------------------------------
# random generators for the property/bounds suites
# ---------------------------------------------------------------------------


def random_distribution(rng: np.random.Generator, k: int, style: str = "dirichlet") -> np.ndarray:
    if style == "dirichlet":
        return rng.dirichlet(np.full(k, rng.uniform(0.2, 5.0)))
    if style == "spiky":
        p = rng.random(k) ** 8
        total = p.sum()
        return p / total if total > 0 else np.full(k, 1.0 / k)
    if style == "near_deterministic":
        p = np.full(k, 1e-6)
        p[rng.integers(k)] = 1.0
        return p / p.sum()
    raise ValueError(style)


_STYLES = ("dirichlet", "spiky", "near_deterministic")


def random_population(
    rng: np.random.Generator, n: int | None = None, actions: int = 6
) -> PopulationSnapshot:
    """Random snapshot with clamped members (every entry >= PROB_FLOOR)."""
    if n is None:
        n = int(rng.integers(1, 9))
    members = np.stack(
        [random_distribution(rng, actions, _STYLES[rng.integers(len(_STYLES))]) for _ in range(n)]
    )
    return PopulationSnapshot(members=clamp_distribution(members))


def random_tiny_mdp(
    rng: np.random.Generator,
    max_states: int = 8,
    actions: tuple[int, int] = (2, 2),
    max_horizon: int = 4,
    max_branch: int = 2,
) -> TinyMDP:
    """Sparse-transition MDP with rewards in [0, 1], sized for enumeration."""
    s = int(rng.integers(2, max_states + 1))
    a1, a2 = actions
    transitions = np.zeros((s, a1, a2, s))
    for i in range(s):
        for u in range(a1):
            for v in range(a2):
                support = rng.choice(s, size=int(rng.integers(1, max_branch + 1)), replace=False)
                weights = rng.dirichlet(np.ones(len(support)))
                transitions[i, u, v, support] = weights
    rewards = rng.random((s, a1, a2))
    initial = np.zeros(s)
    initial[rng.integers(s)] = 1.0
    horizon = int(rng.integers(1, max_horizon + 1))
    return TinyMDP(transitions=transitions, rewards=rewards, horizon=horizon, initial=initial)


def random_tabular_policy(rng: np.random.Generator, states: int, actions: int) -> np.ndarray:
    """Strictly positive tabular policy (valid epsilon-closeness reference)."""
    policy = rng.dirichlet(np.ones(actions), size=states)
    return clamp_distribution(policy, 0.02)


def perturb_policy(rng: np.random.Generator, policy: np.ndarray, scale: float) -> np.ndarray:
    """Multiplicative perturbation, renormalized; stays strictly positive."""
    noisy = policy * (1.0 + scale * (rng.random(policy.shape) - 0.5))
    return noisy / noisy.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# bounds lab: the runnable verification report
# ---------------------------------------------------------------------------


def _property_report(name: str, trials: int, worst: float, tolerance: float, extra=None):
    rec = {
        "property": name,
        "trials": trials,
        "worst_margin": worst,
        "tolerance": tolerance,
        "pass": bool(worst >= -tolerance),
    }
    if extra:
        rec.update(extra)
    return rec


def verify_population_bounds(trials: int = 10_000, seed: int = 0) -> list[dict]:
    """Diversity >= n^2 * population entropy, equality for identical members,
    and the JSD decomposition identity, over random clamped populations."""
    rng = np.random.default_rng(seed)
    worst_margin = np.inf
    worst_identity = 0.0
    for _ in range(trials):
        pop = random_population(rng)
        worst_margin = min(worst_margin, theorem1_margin(pop))
        jsd, mean_h = jsd_decomposition(pop)
        worst_identity = max(worst_identity, abs(population_entropy(pop) - (jsd + mean_h)))
    worst_equality = 0.0
    for _ in range(max(1, trials // 10)):
        n = int(rng.integers(1, 9))
        member = clamp_distribution(random_distribution(rng, 6))
        pop = PopulationSnapshot(members=np.tile(member, (n, 1)))
        worst_equality = max(worst_equality, abs(theorem1_margin(pop)))
    return [
        _property_report("diversity_lower_bound", trials, float(worst_margin), 1e-9),
        _property_report(
            "diversity_equality_identical_members",
            max(1, trials // 10),
            -float(worst_equality),
            1e-9,
        ),
        _property_report("jsd_decomposition_identity", trials, -float(worst_identity), 1e-9),
    ]


def verify_return_envelope(trials: int = 1_000, seed: int = 0, pool_size: int = 3) -> list[dict]:
    """Perturbed-partner returns stay inside the (1 +/- eps)^T envelope, and the
    measured return against an eps-close partner clears the worst-case floor."""
    rng = np.random.default_rng(seed)
    tol = 1e-12
    worst_env = np.inf
    worst_floor = np.inf
    zero_reference = 0
    for _ in range(trials):
        mdp = random_tiny_mdp(rng)
        agent = random_tabular_policy(rng, mdp.n_states, mdp.n_actions[1])
        pool = [random_tabular_policy(rng, mdp.n_states, mdp.n_actions[0]) for _ in range(pool_size)]
        pool_returns = [exhaustive_return(mdp, p, agent).J for p in pool]

        k = int(rng.integers(pool_size))
        human = perturb_policy(rng, pool[k], scale=rng.uniform(0.05, 0.6))
        eps = epsilon_closeness(human, pool[k], mdp)
        j_human = exhaustive_return(mdp, human, agent).J

        bounds = return_bounds(pool_returns[k], eps, mdp.horizon)
        if pool_returns[k] <= tol:
            zero_reference += 1
        worst_env = min(worst_env, j_human - bounds.lower, bounds.upper - j_human)

        floor = corollary_bound(min(pool_returns), eps, mdp.horizon)
        worst_floor = min(worst_floor, j_human - floor)
    return [
        _property_report(
            "return_envelope",
            trials,
            float(worst_env),
            tol,
            extra={"zero_reference_returns": zero_reference},
        ),
        _property_report("worst_case_floor", trials, float(worst_floor), tol),
    ]


def bounds_lab(
    population_trials: int = 10_000, mdp_trials: int = 1_000, seed: int = 0
) -> dict:
    """Full verification report: every property with trial count, worst margin, pass/fail."""
    started = time.time()
    properties = verify_population_bounds(population_trials, seed) + verify_return_envelope(
        mdp_trials, seed + 1
    )
    return {
        "population_trials": population_trials,
        "mdp_trials": mdp_trials,
        "seed": seed,
        "elapsed_seconds": round(time.time() - started, 3),
        "all_pass": all(p["pass"] for p in properties),
        "properties": properties,
    }
