import numpy as np
import pytest

from cooplab.coopgrid import Action, parse_layout, replay_episode
from cooplab.evaluation import (
    EvalSpec,
    cross_play,
    make_holdout_partners,
    play_episode,
    results_csv_lines,
    summary_dict,
)
from cooplab.policy import PolicyParams, init_params
from cooplab.ppo import TrainConfig, net_spec_for

FAST_LAYOUT = parse_layout("horizon=40\n" + "\n".join([
    "XXPXX",
    "O   O",
    "X1 2X",
    "XDXSX",
]), name="fast_cramped")

SPEC = net_spec_for(FAST_LAYOUT, "desk")

FAST_TRAIN = TrainConfig(
    total_env_steps=160, iter_timesteps=80, minibatches=2, minibatch_size=40,
    parallel_envs=2, shaping_horizon=400, epochs=1,
)


def noop_params():
    data = np.zeros(SPEC.num_params())
    offset = 0
    for name, shape in SPEC.manifest():
        if name == "policy.b":
            data[offset + Action.NOOP.value] = 100.0
            break
        offset += int(np.prod(shape))
    return PolicyParams(spec=SPEC, data=data)


def test_play_episode_reward_matches_replay():
    left, right = init_params(SPEC, 0), init_params(SPEC, 1)
    reward, log = play_episode(FAST_LAYOUT, left, right, seed=4)
    actions = [(Action(a), Action(b)) for a, b in log]
    state, replayed = replay_episode(FAST_LAYOUT, actions)
    assert replayed == reward
    assert state.cumulative_score == reward
    assert len(log) == FAST_LAYOUT.horizon


def test_noop_partners_score_zero():
    spec = EvalSpec(
        layout=FAST_LAYOUT, agent=noop_params(),
        partners=(("noop", noop_params()),), seeds=(0, 1),
    )
    result = cross_play(spec)
    assert all(r["reward"] == 0.0 for r in result.rows)
    assert result.aggregate_mean == 0.0


def test_cross_play_reproducible():
    agent, partner = init_params(SPEC, 2), init_params(SPEC, 3)
    spec = EvalSpec(layout=FAST_LAYOUT, agent=agent, partners=(("p", partner),),
                    seeds=(0, 1, 2))
    a, b = cross_play(spec), cross_play(spec)
    assert a.rows == b.rows
    assert a.per_pairing == b.per_pairing


def test_cross_play_table_algebra():
    agent = init_params(SPEC, 4)
    partners = (("p1", init_params(SPEC, 5)), ("p2", init_params(SPEC, 6)))
    result = cross_play(EvalSpec(layout=FAST_LAYOUT, agent=agent, partners=partners,
                                 seeds=(0, 1, 2)))
    means = [v["mean"] for v in result.per_pairing.values()]
    assert result.aggregate_mean == pytest.approx(float(np.mean(means)), abs=1e-12)
    for (name, seat), stats in result.per_pairing.items():
        rows = [r["reward"] for r in result.rows if r["partner"] == name and r["seat"] == seat]
        assert stats["mean"] == pytest.approx(float(np.mean(rows)))
        assert stats["episodes"] == 3
        assert stats["se"] is not None  # seeds >= 2


def test_self_pairing_seat_symmetry():
    agent = init_params(SPEC, 7)
    result = cross_play(
        EvalSpec(layout=FAST_LAYOUT, agent=agent, partners=(("self", agent),),
                 seeds=tuple(range(6)))
    )
    left = np.array([r["reward"] for r in result.rows if r["seat"] == "left"])
    right = np.array([r["reward"] for r in result.rows if r["seat"] == "right"])
    diff = left - right
    se = diff.std(ddof=1) / np.sqrt(len(diff)) if diff.std() > 0 else 0.0
    assert abs(diff.mean()) <= 2 * se + 1e-9


def test_se_omitted_for_single_seed():
    agent = init_params(SPEC, 8)
    result = cross_play(EvalSpec(layout=FAST_LAYOUT, agent=agent,
                                 partners=(("p", init_params(SPEC, 9)),), seeds=(0,)))
    assert all(v["se"] is None for v in result.per_pairing.values())


def test_manifest_mismatch_is_configuration_error():
    other_spec = net_spec_for(parse_layout("horizon=40\n" + "\n".join([
        "XXXPXXX",
        "O     O",
        "X 1 2 X",
        "X     D",
        "XXXSXXX",
    ]), name="other"), "desk")
    agent = init_params(SPEC, 1)
    partner = init_params(other_spec, 2)
    with pytest.raises(ValueError, match="manifest"):
        cross_play(EvalSpec(layout=FAST_LAYOUT, agent=agent, partners=(("bad", partner),)))


def test_csv_and_summary_outputs():
    agent = init_params(SPEC, 10)
    result = cross_play(EvalSpec(layout=FAST_LAYOUT, agent=agent,
                                 partners=(("p", init_params(SPEC, 11)),), seeds=(0, 1)))
    lines = results_csv_lines(result, agent_label="unit")
    assert lines[0] == "layout,agent,partner,seat,seed,reward"
    assert len(lines) == 1 + len(result.rows)
    summary = summary_dict(result)
    assert set(summary) == {"aggregate_mean", "per_partner_mean", "per_pairing"}


def test_holdout_partners_distinct_and_guarded():
    partners = make_holdout_partners(
        FAST_LAYOUT, seeds=[101, 102], config=FAST_TRAIN, net_spec=SPEC,
        reserved_seeds=(1, 2, 3),
    )
    assert len(partners) == 2
    h0 = partners[0][1].data.tobytes()
    h1 = partners[1][1].data.tobytes()
    assert h0 != h1
    with pytest.raises(ValueError, match="already used"):
        make_holdout_partners(FAST_LAYOUT, seeds=[3], config=FAST_TRAIN, net_spec=SPEC,
                              reserved_seeds=(1, 2, 3))
