"""Two-player cooperative soup-cooking gridworld."""
from .dynamics import (
    ContractViolation,
    Event,
    GameState,
    Item,
    PlayerState,
    PotState,
    SHAPED_BASE_VALUES,
    StepOutcome,
    replay_episode,
    reset,
    shaped_reward,
    step,
)
from .encoding import (
    N_CHANNELS,
    decode_observation,
    encode_observation,
    observation_shape,
)
from .layout import (
    Action,
    CellKind,
    LayoutError,
    LayoutSpec,
    Orientation,
    builtin_layout_names,
    load_builtin,
    load_layout_file,
    parse_layout,
    validate_layout,
)

__all__ = [
    "Action",
    "CellKind",
    "ContractViolation",
    "Event",
    "GameState",
    "Item",
    "LayoutError",
    "LayoutSpec",
    "N_CHANNELS",
    "Orientation",
    "PlayerState",
    "PotState",
    "SHAPED_BASE_VALUES",
    "StepOutcome",
    "builtin_layout_names",
    "decode_observation",
    "encode_observation",
    "load_builtin",
    "load_layout_file",
    "observation_shape",
    "parse_layout",
    "replay_episode",
    "reset",
    "shaped_reward",
    "step",
    "validate_layout",
]
