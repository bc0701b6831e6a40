import json

import numpy as np
import pytest

from cooplab.coopgrid import Action, parse_layout, replay_episode
from cooplab.policy import init_params, save_params
from cooplab.ppo import net_spec_for
from cooplab.server import ProtocolError, SessionManager, build_app

FAST_TEXT = "horizon=30\n" + "\n".join([
    "XXPXX",
    "O   O",
    "X1 2X",
    "XDXSX",
])
FAST_LAYOUT = parse_layout(FAST_TEXT, name="fast_cramped")
SPEC = net_spec_for(FAST_LAYOUT, "desk")


@pytest.fixture
def manager(tmp_path):
    mgr = SessionManager(transcript_dir=tmp_path / "transcripts",
                         checkpoint_dir=tmp_path)
    mgr.register_layout(FAST_LAYOUT, FAST_TEXT)
    save_params(init_params(SPEC, 0), tmp_path / "agent.ckpt")
    return mgr


def test_create_session_initial_state(manager):
    session, initial = manager.create("fast_cramped", "agent.ckpt", seat="left",
                                      tick_ms=10, seed=7)
    assert initial["type"] == "state"
    assert initial["timestep"] == 0
    assert initial["score"] == 0.0
    assert initial["grid"] == FAST_LAYOUT.ascii_rows()
    assert len(initial["players"]) == 2
    assert session.human_seat == 0


def test_unknown_layout_and_checkpoint(manager):
    with pytest.raises(ProtocolError) as err:
        manager.create("no_such_layout", "agent.ckpt")
    assert err.value.code == "layout_not_found"
    with pytest.raises(ProtocolError) as err:
        manager.create("fast_cramped", "missing.ckpt")
    assert err.value.code == "checkpoint_not_found"


def test_sessions_are_independent(manager):
    s1, _ = manager.create("fast_cramped", "agent.ckpt", seed=1)
    s2, _ = manager.create("fast_cramped", "agent.ckpt", seed=2)
    assert s1.session_id != s2.session_id
    manager.tick(s1.session_id)
    assert s1.state.timestep == 1
    assert s2.state.timestep == 0


def test_submit_action_applied_on_next_tick(manager):
    session, _ = manager.create("fast_cramped", "agent.ckpt", seat="left", seed=3)
    manager.submit_action(session.session_id, Action.INTERACT.value)
    (msg, *rest) = manager.tick(session.session_id)
    assert msg["actions"][0] == Action.INTERACT.value


def test_default_action_is_noop(manager):
    session, _ = manager.create("fast_cramped", "agent.ckpt", seat="left", seed=4)
    (msg, *_) = manager.tick(session.session_id)
    assert msg["actions"][0] == Action.NOOP.value


def test_last_write_wins_within_tick(manager):
    session, _ = manager.create("fast_cramped", "agent.ckpt", seat="left", seed=5)
    manager.submit_action(session.session_id, Action.UP.value)
    manager.submit_action(session.session_id, Action.LEFT.value)
    (msg, *_) = manager.tick(session.session_id)
    assert msg["actions"][0] == Action.LEFT.value


def test_full_session_ends_and_replays(manager, tmp_path):
    session, _ = manager.create("fast_cramped", "agent.ckpt", seat="right",
                                tick_ms=1, seed=6)
    messages = []
    for _ in range(FAST_LAYOUT.horizon):
        messages += manager.tick(session.session_id)
    assert messages[-1]["type"] == "end"
    assert session.done
    with pytest.raises(ProtocolError) as err:
        manager.tick(session.session_id)
    assert err.value.code == "session_over"
    with pytest.raises(ProtocolError) as err:
        manager.submit_action(session.session_id, 0)
    assert err.value.code == "session_over"

    transcript_path = tmp_path / "transcripts" / f"{session.session_id}.json"
    data = json.loads(transcript_path.read_text())
    actions = [(Action(a), Action(b)) for a, b in data["actions"]]
    state, total = replay_episode(parse_layout(data["layout_text"]), actions)
    assert total == data["final_score"] == messages[-1]["score"]
    assert len(data["actions"]) == FAST_LAYOUT.horizon


def test_agent_seat_matches_policy_distribution(manager):
    """Ticks at a pinned state draw the agent's action from the checkpoint's
    forward probabilities (multinomial 3-sigma)."""
    from cooplab.coopgrid import encode_observation
    from cooplab.policy import forward

    session, _ = manager.create("fast_cramped", "agent.ckpt", seat="left", seed=8)
    initial = session.state
    probs = forward(
        session.agent, encode_observation(FAST_LAYOUT, initial, session.agent_seat)
    ).action_probs
    draws = 4000
    counts = np.zeros(6)
    for _ in range(draws):
        (msg, *_) = manager.tick(session.session_id)
        counts[msg["actions"][session.agent_seat]] += 1
        session.state = initial  # pin the state so every draw sees the same obs
        session.done = False
    for k in range(6):
        p = probs[k]
        assert abs(counts[k] - draws * p) <= 3 * np.sqrt(draws * p * (1 - p)) + 1e-9


def test_bad_messages(manager):
    session, _ = manager.create("fast_cramped", "agent.ckpt", seed=9)
    with pytest.raises(ProtocolError) as err:
        manager.submit_action(session.session_id, 17)
    assert err.value.code == "bad_message"
    with pytest.raises(ProtocolError) as err:
        manager.submit_action("nope", 0)
    assert err.value.code == "unknown_session"
    with pytest.raises(ProtocolError) as err:
        manager.create("fast_cramped", "agent.ckpt", seat="middle")
    assert err.value.code == "bad_message"


def test_build_app_exposes_manager(tmp_path):
    app = build_app(default_layout=FAST_LAYOUT, checkpoint_dir=tmp_path,
                    transcript_dir=tmp_path / "t")
    assert app.state.manager is not None
    routes = {route.path for route in app.routes}
    assert "/ws" in routes
