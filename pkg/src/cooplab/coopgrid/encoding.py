"""Grid-tensor observation encoding, lossless modulo cumulative score.

Channel layout (C = 29):
    0      viewer position
    1      partner position
    2-5    viewer orientation (N, S, E, W)
    6-9    partner orientation
    10-15  cell kinds (floor, counter, pot, onion source, dish source, serve)
    16     pot onion count (raw count at pot cells)
    17     pot cook timer (cook_remaining / cook_time at pot cells)
    18     pot ready flag
    19-21  viewer held item (onion, dish, soup) at viewer position
    22-24  partner held item at partner position
    25-27  counter items (onion, dish, soup)
    28     timestep / horizon (constant plane)

Swapping the viewer index swaps the viewer/partner channel groups exactly.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .dynamics import GameState, Item, PlayerState, PotState
from .layout import CellKind, LayoutSpec, Orientation

ORIENTATIONS = (Orientation.N, Orientation.S, Orientation.E, Orientation.W)
CELL_KINDS = (
    CellKind.FLOOR,
    CellKind.COUNTER,
    CellKind.POT,
    CellKind.ONION_SOURCE,
    CellKind.DISH_SOURCE,
    CellKind.SERVE_WINDOW,
)
ITEMS = (Item.ONION, Item.DISH, Item.SOUP)

N_CHANNELS = 29


@lru_cache(maxsize=64)
def _static_planes(layout: LayoutSpec) -> np.ndarray:
    planes = np.zeros((len(CELL_KINDS), layout.height, layout.width))
    for k, kind in enumerate(CELL_KINDS):
        for y in range(layout.height):
            for x in range(layout.width):
                if layout.cells[y][x] is kind:
                    planes[k, y, x] = 1.0
    return planes


def observation_shape(layout: LayoutSpec) -> tuple[int, int, int]:
    return (N_CHANNELS, layout.height, layout.width)


def encode_observation(layout: LayoutSpec, state: GameState, viewer: int) -> np.ndarray:
    """Encode the state as a (C, H, W) float tensor from one seat's viewpoint."""
    if viewer not in (0, 1):
        raise ValueError(f"viewer must be 0 or 1, got {viewer}")
    obs = np.zeros((N_CHANNELS, layout.height, layout.width))
    obs[10:16] = _static_planes(layout)

    for slot, player in enumerate((state.players[viewer], state.players[1 - viewer])):
        x, y = player.pos
        obs[slot, y, x] = 1.0
        obs[2 + 4 * slot + ORIENTATIONS.index(player.orientation), y, x] = 1.0
        if player.held is not None:
            obs[19 + 3 * slot + ITEMS.index(player.held), y, x] = 1.0

    for (x, y), pot in state.pots:
        obs[16, y, x] = pot.onion_count
        obs[17, y, x] = pot.cook_remaining / layout.cook_time
        obs[18, y, x] = 1.0 if pot.ready else 0.0

    for (x, y), item in state.counters:
        obs[25 + ITEMS.index(item), y, x] = 1.0

    obs[28] = state.timestep / layout.horizon
    return obs


def decode_observation(layout: LayoutSpec, obs: np.ndarray) -> GameState:
    """Invert encode_observation; players come back in (viewer, partner) order.

    Used by the round-trip checks and by debugging tools; cumulative_score is
    not represented in observations, so it decodes as 0.
    """
    players = []
    for slot in range(2):
        ys, xs = np.nonzero(obs[slot])
        (y,), (x,) = ys, xs
        orient = next(
            o for k, o in enumerate(ORIENTATIONS) if obs[2 + 4 * slot + k, y, x] == 1.0
        )
        held = None
        for k, item in enumerate(ITEMS):
            if obs[19 + 3 * slot + k, y, x] == 1.0:
                held = item
        players.append(PlayerState(pos=(int(x), int(y)), orientation=orient, held=held))

    pots = []
    for x, y in sorted(layout.cells_of_kind(CellKind.POT), key=lambda c: (c[1], c[0])):
        pots.append(
            (
                (x, y),
                PotState(
                    onion_count=int(round(obs[16, y, x])),
                    cook_remaining=int(round(obs[17, y, x] * layout.cook_time)),
                    ready=obs[18, y, x] == 1.0,
                ),
            )
        )

    counters = []
    for k, item in enumerate(ITEMS):
        for y, x in zip(*np.nonzero(obs[25 + k])):
            counters.append(((int(x), int(y)), item))

    timestep = int(round(float(obs[28, 0, 0]) * layout.horizon))
    return GameState(
        players=(players[0], players[1]),
        pots=tuple(pots),
        counters=tuple(sorted(counters)),
        timestep=timestep,
    )
