"""Deterministic engine, lookahead search and benchmark harness for online 3D bin packing."""

from binpack3d.core import (
    Action,
    BinConfig,
    BOTH_ORIENTATIONS,
    DEFAULT_ORIENTATIONS,
    EpisodeState,
    FeasibilityMask,
    FootprintOutOfBounds,
    HeightMap,
    Item,
    NoFeasibleAction,
    Orientation,
    PackedItem,
    PackingError,
    PlacementInfeasible,
    RewardMode,
    SupportStats,
    block_footprint,
    compute_mask,
    is_feasible,
    is_stable,
    new_episode,
    place,
    rest_height,
    reward,
    step,
    support_stats,
)

__all__ = [
    "Action",
    "BinConfig",
    "BOTH_ORIENTATIONS",
    "DEFAULT_ORIENTATIONS",
    "EpisodeState",
    "FeasibilityMask",
    "FootprintOutOfBounds",
    "HeightMap",
    "Item",
    "NoFeasibleAction",
    "Orientation",
    "PackedItem",
    "PackingError",
    "PlacementInfeasible",
    "RewardMode",
    "SupportStats",
    "block_footprint",
    "compute_mask",
    "is_feasible",
    "is_stable",
    "new_episode",
    "place",
    "rest_height",
    "reward",
    "step",
    "support_stats",
]

__version__ = "0.1.0"
