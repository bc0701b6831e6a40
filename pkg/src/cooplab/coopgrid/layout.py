"""Layout parsing and validation for the two-player kitchen gridworld.

Layout files are ASCII grids, one row per line:
    ' ' floor   'X' counter   'P' pot   'O' onion source
    'D' dish source   'S' serve window  '1'/'2' player starts (on floor)
Optional ``key=value`` header lines before the grid override ``horizon``,
``cook_time`` and ``soup_reward``.
"""
from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, replace
from enum import Enum


class CellKind(Enum):
    FLOOR = " "
    COUNTER = "X"
    POT = "P"
    ONION_SOURCE = "O"
    DISH_SOURCE = "D"
    SERVE_WINDOW = "S"


class Orientation(Enum):
    N = (0, -1)
    S = (0, 1)
    E = (1, 0)
    W = (-1, 0)

    @property
    def delta(self) -> tuple[int, int]:
        return self.value


# Stable integer encoding 0..5, shared with the wire protocol and the UI.
class Action(Enum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    NOOP = 4
    INTERACT = 5


MOVE_DELTAS = {
    Action.UP: Orientation.N,
    Action.DOWN: Orientation.S,
    Action.LEFT: Orientation.W,
    Action.RIGHT: Orientation.E,
}

_HEADER_KEYS = {"horizon": int, "cook_time": int, "soup_reward": float}

REQUIRED_KINDS = (
    CellKind.POT,
    CellKind.ONION_SOURCE,
    CellKind.DISH_SOURCE,
    CellKind.SERVE_WINDOW,
)

_KIND_LABEL = {
    CellKind.POT: "Pot",
    CellKind.ONION_SOURCE: "OnionSource",
    CellKind.DISH_SOURCE: "DishSource",
    CellKind.SERVE_WINDOW: "ServeWindow",
}


class LayoutError(ValueError):
    """Raised for malformed or invalid layout text."""


@dataclass(frozen=True)
class LayoutSpec:
    name: str
    width: int
    height: int
    cells: tuple[tuple[CellKind, ...], ...]  # cells[y][x]
    start_positions: tuple[tuple[int, int], tuple[int, int]]
    start_orientations: tuple[Orientation, Orientation] = (Orientation.S, Orientation.S)
    horizon: int = 400
    cook_time: int = 20
    soup_reward: float = 20.0
    onions_per_soup: int = 3

    def cell(self, x: int, y: int) -> CellKind:
        return self.cells[y][x]

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def is_floor(self, x: int, y: int) -> bool:
        return self.in_bounds(x, y) and self.cells[y][x] is CellKind.FLOOR

    def cells_of_kind(self, kind: CellKind) -> tuple[tuple[int, int], ...]:
        return tuple(
            (x, y)
            for y in range(self.height)
            for x in range(self.width)
            if self.cells[y][x] is kind
        )

    def ascii_rows(self) -> list[str]:
        """Grid as ASCII rows (start markers not included)."""
        return ["".join(c.value for c in row) for row in self.cells]


def _reachable_floor(layout_cells, width, height, start):
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for dx, dy in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nx, ny = x + dx, y + dy
            if 0 <= nx < width and 0 <= ny < height:
                if layout_cells[ny][nx] is CellKind.FLOOR and (nx, ny) not in seen:
                    seen.add((nx, ny))
                    stack.append((nx, ny))
    return seen


def validate_layout(layout: LayoutSpec) -> None:
    """Check every LayoutSpec invariant, raising LayoutError on the first failure."""
    (p1, p2) = layout.start_positions
    if p1 == p2:
        raise LayoutError("start positions must be distinct cells")
    for pos in (p1, p2):
        if not layout.is_floor(*pos):
            raise LayoutError(f"start position {pos} is not a Floor cell")

    for x in range(layout.width):
        for y in (0, layout.height - 1):
            if layout.cells[y][x] is CellKind.FLOOR:
                raise LayoutError(f"border cell ({x},{y}) must not be Floor")
    for y in range(layout.height):
        for x in (0, layout.width - 1):
            if layout.cells[y][x] is CellKind.FLOOR:
                raise LayoutError(f"border cell ({x},{y}) must not be Floor")

    for kind in REQUIRED_KINDS:
        if not layout.cells_of_kind(kind):
            raise LayoutError(f"no {_KIND_LABEL[kind]}")

    for start in layout.start_positions:
        reached = _reachable_floor(layout.cells, layout.width, layout.height, start)
        adjacent_kinds = set()
        for x, y in reached:
            for dx, dy in ((0, 1), (0, -1), (1, 0), (-1, 0)):
                nx, ny = x + dx, y + dy
                if layout.in_bounds(nx, ny):
                    adjacent_kinds.add(layout.cells[ny][nx])
        for kind in REQUIRED_KINDS:
            if kind not in adjacent_kinds:
                raise LayoutError(
                    f"{_KIND_LABEL[kind]} unreachable from start {start}"
                )

    if layout.horizon < 1 or layout.cook_time < 1 or layout.onions_per_soup < 1:
        raise LayoutError("horizon, cook_time and onions_per_soup must be >= 1")


def parse_layout(text: str, name: str = "layout") -> LayoutSpec:
    """Parse layout-file content into a validated LayoutSpec."""
    overrides: dict[str, object] = {}
    rows: list[str] = []
    grid_started = False
    grid_first_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not grid_started:
            stripped = raw.strip()
            if not stripped:
                continue
            if "=" in stripped and stripped.split("=", 1)[0].strip() in _HEADER_KEYS:
                key, value = (part.strip() for part in stripped.split("=", 1))
                try:
                    overrides[key] = _HEADER_KEYS[key](value)
                except ValueError as exc:
                    raise LayoutError(f"line {lineno}: bad {key} value {value!r}") from exc
                continue
            grid_started = True
            grid_first_line = lineno
        if grid_started:
            rows.append(raw.rstrip("\n"))

    while rows and not rows[-1].strip():
        rows.pop()
    if not rows:
        raise LayoutError("layout has no grid rows")

    width = len(rows[0])
    starts: dict[str, tuple[int, int]] = {}
    cells: list[tuple[CellKind, ...]] = []
    char_to_kind = {kind.value: kind for kind in CellKind}
    for y, row in enumerate(rows):
        lineno = grid_first_line + y
        if len(row) != width:
            raise LayoutError(f"line {lineno}: row width {len(row)} != {width}")
        parsed_row = []
        for x, ch in enumerate(row):
            if ch in ("1", "2"):
                if ch in starts:
                    raise LayoutError(f"line {lineno}, column {x + 1}: duplicate start '{ch}'")
                starts[ch] = (x, y)
                parsed_row.append(CellKind.FLOOR)
            elif ch in char_to_kind:
                parsed_row.append(char_to_kind[ch])
            else:
                raise LayoutError(f"line {lineno}, column {x + 1}: malformed character {ch!r}")
        cells.append(tuple(parsed_row))

    if "1" not in starts or "2" not in starts:
        missing = [m for m in ("1", "2") if m not in starts]
        raise LayoutError(f"missing start position(s): {', '.join(missing)}")

    layout = LayoutSpec(
        name=name,
        width=width,
        height=len(cells),
        cells=tuple(cells),
        start_positions=(starts["1"], starts["2"]),
        **overrides,
    )
    validate_layout(layout)
    return layout


def load_layout_file(path) -> LayoutSpec:
    from pathlib import Path

    p = Path(path)
    return parse_layout(p.read_text(encoding="utf-8"), name=p.stem)


def builtin_layout_names() -> list[str]:
    root = importlib.resources.files(__package__) / "layouts"
    return sorted(f.name[: -len(".layout")] for f in root.iterdir() if f.name.endswith(".layout"))


def load_builtin(name: str) -> LayoutSpec:
    root = importlib.resources.files(__package__) / "layouts"
    resource = root / f"{name}.layout"
    if not resource.is_file():
        raise LayoutError(
            f"unknown builtin layout {name!r} (available: {', '.join(builtin_layout_names())})"
        )
    return parse_layout(resource.read_text(encoding="utf-8"), name=name)
