"""Deterministic two-player kitchen dynamics.

States are immutable values; ``step`` is a pure function of (layout, state,
joint action). Movement and interaction micro-rules:

* a move always updates orientation; the position changes only if the target
  cell is Floor and is free after resolution: simultaneous moves into one
  cell and direct swaps block both players, a cell the partner keeps blocks,
  and a cell the partner vacates this step may be followed into;
* Interact acts on the faced cell: sources hand out items to an empty hand,
  pots accept onions until full and hand soup to a dish once ready, counters
  place or pick a single item, serve windows accept soup for the task reward;
* cooking starts by itself when the third onion lands in a pot, and the
  countdown ticks once per step before interactions resolve.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .layout import Action, CellKind, LayoutSpec, MOVE_DELTAS, Orientation


class Item(Enum):
    ONION = "onion"
    DISH = "dish"
    SOUP = "soup"


class Event(Enum):
    ONION_POTTED = "onion_potted"
    DISH_PICKUP = "dish_pickup"
    SOUP_PICKUP = "soup_pickup"
    SOUP_SERVED = "soup_served"


# Shaped-reward base values; disabled during evaluation and annealed to zero
# over the shaping horizon during training.
SHAPED_BASE_VALUES = {
    Event.ONION_POTTED: 3.0,
    Event.DISH_PICKUP: 3.0,
    Event.SOUP_PICKUP: 5.0,
}


def shaped_reward(event: Event, progress: float) -> float:
    """Annealed shaped reward for one interaction event.

    ``progress`` is the fraction of the shaping horizon consumed; the value
    decays linearly to zero at progress 1.
    """
    base = SHAPED_BASE_VALUES.get(event, 0.0)
    return base * max(0.0, 1.0 - progress)


@dataclass(frozen=True)
class PlayerState:
    pos: tuple[int, int]
    orientation: Orientation
    held: Item | None = None


@dataclass(frozen=True)
class PotState:
    onion_count: int
    cook_remaining: int
    ready: bool = False


@dataclass(frozen=True)
class GameState:
    players: tuple[PlayerState, PlayerState]
    pots: tuple[tuple[tuple[int, int], PotState], ...]  # sorted by (y, x)
    counters: tuple[tuple[tuple[int, int], Item], ...]  # occupied counters only
    timestep: int = 0
    cumulative_score: float = 0.0

    def pot_at(self, cell: tuple[int, int]) -> PotState | None:
        for pos, pot in self.pots:
            if pos == cell:
                return pot
        return None

    def counter_item(self, cell: tuple[int, int]) -> Item | None:
        for pos, item in self.counters:
            if pos == cell:
                return item
        return None


@dataclass(frozen=True)
class StepOutcome:
    next_state: GameState
    task_reward: float
    shaped_reward: float
    done: bool
    events: tuple[tuple[int, Event], ...] = ()  # (player index, event)


class ContractViolation(RuntimeError):
    """Raised when an operation is called outside its precondition."""


def reset(layout: LayoutSpec, seed: int = 0) -> GameState:
    """Initial state: players at their start cells, pots empty, timestep 0.

    Start randomization is disabled, so the seed does not influence the
    state; it is accepted to keep call sites uniform.
    """
    del seed
    players = tuple(
        PlayerState(pos=pos, orientation=orient)
        for pos, orient in zip(layout.start_positions, layout.start_orientations)
    )
    pots = tuple(
        (cell, PotState(onion_count=0, cook_remaining=layout.cook_time))
        for cell in sorted(layout.cells_of_kind(CellKind.POT), key=lambda c: (c[1], c[0]))
    )
    return GameState(players=players, pots=pots, counters=())


def _tick_pots(layout: LayoutSpec, pots):
    out = []
    for cell, pot in pots:
        if pot.onion_count == layout.onions_per_soup and pot.cook_remaining > 0:
            remaining = pot.cook_remaining - 1
            pot = PotState(pot.onion_count, remaining, ready=remaining == 0)
        out.append((cell, pot))
    return tuple(out)


def _resolve_moves(layout: LayoutSpec, players, joint):
    positions = [p.pos for p in players]
    orientations = [p.orientation for p in players]
    proposed = list(positions)
    for i, action in enumerate(joint):
        if action in MOVE_DELTAS:
            orient = MOVE_DELTAS[action]
            orientations[i] = orient
            dx, dy = orient.delta
            target = (positions[i][0] + dx, positions[i][1] + dy)
            if layout.is_floor(*target):
                proposed[i] = target
    if proposed[0] == proposed[1]:
        proposed = positions  # both aimed at the same cell
    elif proposed[0] == positions[1] and proposed[1] == positions[0]:
        proposed = positions  # direct swap
    else:
        # a cell that stays occupied blocks; a vacated one may be followed into
        for i in (0, 1):
            if proposed[i] == positions[1 - i] and proposed[1 - i] == positions[1 - i]:
                proposed[i] = positions[i]
    return [
        replace(p, pos=pos, orientation=orient)
        for p, pos, orient in zip(players, proposed, orientations)
    ]


def _apply_interact(layout, player, pots, counters, onions_per_soup):
    """Resolve one player's Interact. Returns updated pieces plus events/reward."""
    dx, dy = player.orientation.delta
    faced = (player.pos[0] + dx, player.pos[1] + dy)
    if not layout.in_bounds(*faced):
        return player, pots, counters, 0.0, None
    kind = layout.cell(*faced)
    held = player.held
    events = None
    reward = 0.0

    if kind is CellKind.ONION_SOURCE and held is None:
        player = replace(player, held=Item.ONION)
    elif kind is CellKind.DISH_SOURCE and held is None:
        player = replace(player, held=Item.DISH)
        # pays a shaped event only while a soup is underway; an unconditional
        # dish bonus is farmable via the source/counter loop
        if any(pot.onion_count == onions_per_soup for _, pot in pots):
            events = Event.DISH_PICKUP
    elif kind is CellKind.POT:
        idx = next(i for i, (cell, _) in enumerate(pots) if cell == faced)
        pot = pots[idx][1]
        if held is Item.ONION and pot.onion_count < onions_per_soup:
            pot = PotState(pot.onion_count + 1, pot.cook_remaining, pot.ready)
            pots = pots[:idx] + ((faced, pot),) + pots[idx + 1 :]
            player = replace(player, held=None)
            events = Event.ONION_POTTED
        elif held is Item.DISH and pot.ready:
            pots = pots[:idx] + ((faced, PotState(0, layout.cook_time)),) + pots[idx + 1 :]
            player = replace(player, held=Item.SOUP)
            events = Event.SOUP_PICKUP
    elif kind is CellKind.COUNTER:
        on_counter = next((item for cell, item in counters if cell == faced), None)
        if held is not None and on_counter is None:
            counters = tuple(sorted(counters + ((faced, held),)))
            player = replace(player, held=None)
        elif held is None and on_counter is not None:
            counters = tuple(pair for pair in counters if pair[0] != faced)
            player = replace(player, held=on_counter)
    elif kind is CellKind.SERVE_WINDOW and held is Item.SOUP:
        player = replace(player, held=None)
        reward = layout.soup_reward
        events = Event.SOUP_SERVED

    return player, pots, counters, reward, events


def step(layout: LayoutSpec, state: GameState, joint: tuple[Action, Action]) -> StepOutcome:
    """Advance one timestep. Pure; raises ContractViolation on terminal states."""
    if state.timestep >= layout.horizon:
        raise ContractViolation(
            f"step called on terminal state (timestep {state.timestep} >= horizon)"
        )

    pots = _tick_pots(layout, state.pots)
    players = _resolve_moves(layout, state.players, joint)

    counters = state.counters
    task_reward = 0.0
    shaped = 0.0
    events: list[tuple[int, Event]] = []
    for i in (0, 1):
        if joint[i] is Action.INTERACT:
            players[i], pots, counters, reward, event = _apply_interact(
                layout, players[i], pots, counters, layout.onions_per_soup
            )
            task_reward += reward
            if event is not None:
                events.append((i, event))
                shaped += SHAPED_BASE_VALUES.get(event, 0.0)

    timestep = state.timestep + 1
    next_state = GameState(
        players=tuple(players),
        pots=pots,
        counters=counters,
        timestep=timestep,
        cumulative_score=state.cumulative_score + task_reward,
    )
    return StepOutcome(
        next_state=next_state,
        task_reward=task_reward,
        shaped_reward=shaped,
        done=timestep == layout.horizon,
        events=tuple(events),
    )


def replay_episode(layout: LayoutSpec, actions: list[tuple[Action, Action]], seed: int = 0):
    """Replay a joint-action log from reset; returns (final state, total task reward)."""
    state = reset(layout, seed)
    total = 0.0
    for joint in actions:
        outcome = step(layout, state, joint)
        state = outcome.next_state
        total += outcome.task_reward
    return state, total
