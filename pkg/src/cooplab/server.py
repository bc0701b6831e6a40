"""Live game service: one seat drives from a checkpoint, the other from a
connected client, on a fixed tick.

Wire protocol: newline-delimited JSON over a WebSocket.
  client -> server: {"type": "create", "layout": name, "agent": ckpt path,
                     "seat": "left"|"right", "tick_ms": int}
                    {"type": "action", "session": id, "action": 0..5}
  server -> client: {"type": "state", "session", "timestep", "score",
                     "reward", "grid", "players", "pots", "counters",
                     "actions"}
                    {"type": "end", "session", "score"}
                    {"type": "error", "code", "detail"}

The session manager is transport-free and synchronous: `tick` advances one
step (agent seat sampled from the checkpointed policy, human seat from the
last submitted action, Noop by default) and returns the wire messages.
"""
from __future__ import annotations

import asyncio
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import seeding
from .coopgrid import (
    Action,
    GameState,
    LayoutSpec,
    encode_observation,
    load_builtin,
    reset,
    step,
)
from .policy import PolicyParams, forward, load_params, sample_action


class ProtocolError(Exception):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail

    def message(self) -> dict:
        return {"type": "error", "code": self.code, "detail": self.detail}


@dataclass
class Session:
    session_id: str
    layout: LayoutSpec
    layout_text: str
    agent: PolicyParams
    agent_label: str
    human_seat: int  # 0 = left, 1 = right
    tick_ms: int
    state: GameState
    rng: np.random.Generator
    seed: int
    pending_action: Action = Action.NOOP
    actions: list[tuple[int, int]] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    score: float = 0.0
    done: bool = False

    @property
    def agent_seat(self) -> int:
        return 1 - self.human_seat


def state_message(session: Session, reward: float, applied: tuple[int, int]) -> dict:
    state = session.state
    return {
        "type": "state",
        "session": session.session_id,
        "timestep": state.timestep,
        "horizon": session.layout.horizon,
        "score": state.cumulative_score,
        "reward": reward,
        "grid": session.layout.ascii_rows(),
        "players": [
            {
                "x": p.pos[0],
                "y": p.pos[1],
                "orientation": p.orientation.name,
                "held": p.held.value if p.held else None,
            }
            for p in state.players
        ],
        "pots": [
            {
                "x": cell[0],
                "y": cell[1],
                "onions": pot.onion_count,
                "cook_remaining": pot.cook_remaining,
                "ready": pot.ready,
            }
            for cell, pot in state.pots
        ],
        "counters": [
            {"x": cell[0], "y": cell[1], "item": item.value} for cell, item in state.counters
        ],
        "actions": list(applied),
        "human_seat": session.human_seat,
        "tick_ms": session.tick_ms,
    }


class SessionManager:
    """Owns sessions; one mutation stream per session (tick or submit)."""

    def __init__(
        self,
        default_layout: LayoutSpec | None = None,
        checkpoint_dir: Path | None = None,
        transcript_dir: Path | None = None,
    ):
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.transcript_dir = Path(transcript_dir) if transcript_dir else None
        self.sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)
        self._layouts: dict[str, tuple[LayoutSpec, str]] = {}
        if default_layout is not None:
            self.register_layout(default_layout, "\n".join(default_layout.ascii_rows()))

    def register_layout(self, layout: LayoutSpec, text: str) -> None:
        self._layouts[layout.name] = (layout, text)

    def _resolve_layout(self, name: str) -> tuple[LayoutSpec, str]:
        if name in self._layouts:
            return self._layouts[name]
        try:
            layout = load_builtin(name)
        except Exception as exc:
            raise ProtocolError("layout_not_found", f"unknown layout {name!r}") from exc
        from importlib.resources import files

        text = (files("cooplab.coopgrid") / "layouts" / f"{name}.layout").read_text()
        self._layouts[name] = (layout, text)
        return layout, text

    def _resolve_checkpoint(self, label: str) -> PolicyParams:
        path = Path(label)
        if not path.is_absolute() and self.checkpoint_dir is not None:
            path = self.checkpoint_dir / path
        if not path.exists():
            raise ProtocolError("checkpoint_not_found", f"no checkpoint at {path}")
        try:
            return load_params(path)
        except ValueError as exc:
            raise ProtocolError("checkpoint_not_found", str(exc)) from exc

    def create(
        self,
        layout_name: str,
        agent: str,
        seat: str = "left",
        tick_ms: int = 150,
        seed: int | None = None,
    ) -> tuple[Session, dict]:
        layout, text = self._resolve_layout(layout_name)
        params = self._resolve_checkpoint(agent)
        if params.spec.height != layout.height or params.spec.width != layout.width:
            raise ProtocolError(
                "checkpoint_not_found",
                f"checkpoint grid {params.spec.height}x{params.spec.width} does not "
                f"match layout {layout.height}x{layout.width}",
            )
        if seat not in ("left", "right"):
            raise ProtocolError("bad_message", f"seat must be left or right, got {seat!r}")
        if tick_ms < 1:
            raise ProtocolError("bad_message", "tick_ms must be >= 1")
        session_seed = int(np.random.SeedSequence().entropy % 2**32) if seed is None else seed
        session = Session(
            session_id=f"s{next(self._ids)}",
            layout=layout,
            layout_text=text,
            agent=params,
            agent_label=agent,
            human_seat=0 if seat == "left" else 1,
            tick_ms=int(tick_ms),
            state=reset(layout, session_seed),
            rng=seeding.derive_rng(session_seed, seeding.EVAL),
            seed=session_seed,
        )
        self.sessions[session.session_id] = session
        return session, state_message(session, reward=0.0, applied=(-1, -1))

    def _get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ProtocolError("unknown_session", f"no session {session_id!r}")
        return session

    def submit_action(self, session_id: str, action: int) -> dict:
        session = self._get(session_id)
        if session.done:
            raise ProtocolError("session_over", "the episode already ended")
        try:
            session.pending_action = Action(int(action))
        except ValueError as exc:
            raise ProtocolError("bad_message", f"action must be 0..5, got {action!r}") from exc
        return {"type": "ack", "session": session_id}

    def tick(self, session_id: str) -> list[dict]:
        """Advance one step; returns [state message] plus an end message at horizon."""
        session = self._get(session_id)
        if session.done:
            raise ProtocolError("session_over", "the episode already ended")

        obs = encode_observation(session.layout, session.state, session.agent_seat)
        agent_action_idx, _ = sample_action(forward(session.agent, obs), session.rng)
        joint = [None, None]
        joint[session.human_seat] = session.pending_action
        joint[session.agent_seat] = Action(agent_action_idx)
        session.pending_action = Action.NOOP

        outcome = step(session.layout, session.state, tuple(joint))
        session.state = outcome.next_state
        applied = (joint[0].value, joint[1].value)
        session.actions.append(applied)
        session.rewards.append(outcome.task_reward)
        session.score += outcome.task_reward

        messages = [state_message(session, reward=outcome.task_reward, applied=applied)]
        if outcome.done:
            session.done = True
            messages.append(
                {"type": "end", "session": session.session_id, "score": session.score}
            )
            self._write_transcript(session)
        return messages

    def transcript(self, session: Session) -> dict:
        return {
            "session": session.session_id,
            "layout_name": session.layout.name,
            "layout_text": session.layout_text,
            "agent_checkpoint": session.agent_label,
            "human_seat": session.human_seat,
            "tick_ms": session.tick_ms,
            "seed": session.seed,
            "actions": [list(a) for a in session.actions],
            "rewards": session.rewards,
            "final_score": session.score,
        }

    def _write_transcript(self, session: Session) -> None:
        if self.transcript_dir is None:
            return
        self.transcript_dir.mkdir(parents=True, exist_ok=True)
        path = self.transcript_dir / f"{session.session_id}.json"
        path.write_text(json.dumps(self.transcript(session), indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# websocket wiring
# ---------------------------------------------------------------------------


def build_app(
    default_layout: LayoutSpec | None = None,
    checkpoint_dir: Path | None = None,
    static_dir: Path | None = None,
    transcript_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="cooplab live play")
    manager = SessionManager(
        default_layout=default_layout,
        checkpoint_dir=checkpoint_dir,
        transcript_dir=transcript_dir,
    )
    app.state.manager = manager

    async def send(ws: WebSocket, message: dict) -> None:
        await ws.send_text(json.dumps(message) + "\n")

    async def tick_loop(ws: WebSocket, session: Session) -> None:
        try:
            while not session.done:
                await asyncio.sleep(session.tick_ms / 1000.0)
                for message in manager.tick(session.session_id):
                    await send(ws, message)
        except ProtocolError as exc:
            await send(ws, exc.message())
        except Exception:
            pass  # client went away mid-episode

    @app.websocket("/ws")
    async def websocket_endpoint(ws: WebSocket):
        await ws.accept()
        tick_tasks: list[asyncio.Task] = []
        try:
            while True:
                raw = await ws.receive_text()
                for line in raw.splitlines():
                    if not line.strip():
                        continue
                    try:
                        message = json.loads(line)
                    except json.JSONDecodeError:
                        await send(ws, ProtocolError("bad_message", "not JSON").message())
                        continue
                    try:
                        kind = message.get("type")
                        if kind == "create":
                            session, initial = manager.create(
                                layout_name=message.get("layout", ""),
                                agent=message.get("agent", ""),
                                seat=message.get("seat", "left"),
                                tick_ms=int(message.get("tick_ms", 150)),
                                seed=message.get("seed"),
                            )
                            await send(ws, initial)
                            tick_tasks.append(
                                asyncio.create_task(tick_loop(ws, session))
                            )
                        elif kind == "action":
                            manager.submit_action(
                                message.get("session", ""), message.get("action", -1)
                            )
                        else:
                            await send(
                                ws,
                                ProtocolError(
                                    "bad_message", f"unknown type {kind!r}"
                                ).message(),
                            )
                    except ProtocolError as exc:
                        await send(ws, exc.message())
        except WebSocketDisconnect:
            pass
        finally:
            for task in tick_tasks:
                task.cancel()

    if static_dir is not None and Path(static_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="client")

    return app
