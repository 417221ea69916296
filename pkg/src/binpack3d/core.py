"""Height-map bin state and exact placement rules for a single bin.

The bin is an ``L x W x H`` grid of unit cells.  State is a height map:
for every floor cell ``(x, y)`` the current stack height in integer
units.  An item is an axis-aligned box dropped with its front-left
corner over an anchor cell; it comes to rest on the tallest stack under
its footprint, so items never overhang and never slide under existing
ledges.

Everything in this module is exact: heights are integers, support
ratios and rewards are `fractions.Fraction`.  Two runs that take the
same actions produce bit-identical states on any platform, which is
what makes replays and report hashing trustworthy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

HEIGHT_DTYPE = np.int64


class PackingError(Exception):
    """Base class for engine errors."""


class FootprintOutOfBounds(PackingError):
    """The item footprint does not fit inside the bin floor at this anchor."""


class PlacementInfeasible(PackingError):
    """Placement rejected: out of bounds, above the ceiling, or unstable."""


class NoFeasibleAction(PackingError):
    """No feasible placement exists for the item under consideration."""


class Orientation(enum.IntEnum):
    """Horizontal orientation of an item footprint."""

    IDENTITY = 0
    SWAP_LW = 1

    def footprint(self, l: int, w: int) -> tuple[int, int]:
        """Effective (length, width) of an ``l x w`` footprint."""
        if self is Orientation.IDENTITY:
            return (l, w)
        return (w, l)


DEFAULT_ORIENTATIONS: tuple[Orientation, ...] = (Orientation.IDENTITY,)
BOTH_ORIENTATIONS: tuple[Orientation, ...] = (Orientation.IDENTITY, Orientation.SWAP_LW)


@dataclass(frozen=True)
class BinConfig:
    """Bin dimensions in integer grid units: L along x, W along y, H up."""

    L: int
    W: int
    H: int

    def __post_init__(self) -> None:
        for name in ("L", "W", "H"):
            if getattr(self, name) < 1:
                raise ValueError(f"bin dimension {name} must be >= 1, got {getattr(self, name)}")

    @property
    def volume(self) -> int:
        return self.L * self.W * self.H

    @property
    def floor_cells(self) -> int:
        return self.L * self.W


@dataclass(frozen=True)
class Item:
    """An axis-aligned box: ``l`` along x, ``w`` along y, ``h`` up.

    ``type_id`` is the index of the box shape in the item set it was
    drawn from, or -1 when unknown (items read back from a plain file).
    It never influences the physics, only bookkeeping.
    """

    l: int
    w: int
    h: int
    type_id: int = -1

    def __post_init__(self) -> None:
        if min(self.l, self.w, self.h) < 1:
            raise ValueError(f"item dimensions must be >= 1, got {(self.l, self.w, self.h)}")

    @property
    def volume(self) -> int:
        return self.l * self.w * self.h

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.l, self.w, self.h)

    def footprint(self, orientation: Orientation) -> tuple[int, int]:
        return orientation.footprint(self.l, self.w)


@dataclass(frozen=True)
class Action:
    """A placement decision: anchor cell plus footprint orientation."""

    x: int
    y: int
    orientation: Orientation = Orientation.IDENTITY

    def flat_index(self, bin: BinConfig) -> int:
        """Flat action id: ``o * L * W + x + L * y`` (x varies fastest).

        The same cell order is used whenever a grid is serialized to a
        flat list, so a flat action id always indexes its own mask cell.
        """
        return int(self.orientation) * bin.floor_cells + self.x + bin.L * self.y

    @classmethod
    def from_flat(cls, index: int, bin: BinConfig) -> "Action":
        block, cell = divmod(int(index), bin.floor_cells)
        y, x = divmod(cell, bin.L)
        return cls(x=x, y=y, orientation=Orientation(block))


@dataclass(frozen=True, eq=False)
class HeightMap:
    """Immutable per-column stack heights of one bin, shape ``(L, W)``."""

    grid: np.ndarray
    bin: BinConfig

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=HEIGHT_DTYPE)
        if grid.shape != (self.bin.L, self.bin.W):
            raise ValueError(f"grid shape {grid.shape} does not match bin {self.bin}")
        if int(grid.min()) < 0 or int(grid.max()) > self.bin.H:
            raise ValueError("heights must stay within [0, H]")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def empty(cls, bin: BinConfig) -> "HeightMap":
        return cls(np.zeros((bin.L, bin.W), dtype=HEIGHT_DTYPE), bin)

    @property
    def max_height(self) -> int:
        return int(self.grid.max())

    @property
    def free_volume(self) -> int:
        """Unit cells of empty space above the stacks."""
        return self.bin.volume - int(self.grid.sum())

    def flat(self) -> list[int]:
        """Heights as a flat list in action-id cell order (x fastest)."""
        return [int(v) for v in self.grid.ravel(order="F")]

    @classmethod
    def from_flat(cls, values: Sequence[int], bin: BinConfig) -> "HeightMap":
        grid = np.asarray(values, dtype=HEIGHT_DTYPE).reshape((bin.L, bin.W), order="F")
        return cls(grid, bin)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HeightMap):
            return NotImplemented
        return self.bin == other.bin and bool(np.array_equal(self.grid, other.grid))


def _check_bounds(bin: BinConfig, le: int, we: int, x: int, y: int) -> None:
    if x < 0 or y < 0 or x + le > bin.L or y + we > bin.W:
        raise FootprintOutOfBounds(
            f"footprint {le}x{we} at ({x}, {y}) leaves the {bin.L}x{bin.W} floor"
        )


def rest_height(height_map: HeightMap, le: int, we: int, x: int, y: int) -> int:
    """Height at which an ``le x we`` footprint anchored at ``(x, y)`` comes to rest."""
    _check_bounds(height_map.bin, le, we, x, y)
    return int(height_map.grid[x : x + le, y : y + we].max())


def place(
    height_map: HeightMap, item: Item, orientation: Orientation, x: int, y: int
) -> HeightMap:
    """Drop ``item`` at the anchor and return the new height map.

    Every footprint cell is raised to the common top ``rest + item.h``:
    exactly the physics of a rigid box settling on the tallest stack
    below it.  Bounds are checked here; ceiling and stability are the
    caller's job (`is_feasible`).  A drop whose top would poke above the
    ceiling raises ``ValueError`` from the height-map constructor.
    """
    le, we = item.footprint(orientation)
    top = rest_height(height_map, le, we, x, y) + item.h
    grid = height_map.grid.copy()
    grid[x : x + le, y : y + we] = top
    return HeightMap(grid, height_map.bin)


@dataclass(frozen=True)
class SupportStats:
    """Contact statistics of a footprint resting at its drop height."""

    ratio: Fraction
    corners: int
    supported_cells: int
    area: int


def support_stats(
    height_map: HeightMap, item: Item, orientation: Orientation, x: int, y: int
) -> SupportStats:
    """Support of the footprint at its rest height.

    A footprint cell is supporting iff its column top equals the rest
    height; the bin floor supports at height zero.  The four corner
    positions are tested independently, so thin footprints whose corners
    coincide still report out of four.
    """
    le, we = item.footprint(orientation)
    _check_bounds(height_map.bin, le, we, x, y)
    region = height_map.grid[x : x + le, y : y + we]
    top = int(region.max())
    support = region == top
    cells = int(support.sum())
    corners = (
        int(support[0, 0])
        + int(support[le - 1, 0])
        + int(support[0, we - 1])
        + int(support[le - 1, we - 1])
    )
    return SupportStats(
        ratio=Fraction(cells, le * we), corners=corners, supported_cells=cells, area=le * we
    )


def is_stable(stats: SupportStats) -> bool:
    """Three-rule stability test, all thresholds inclusive.

    Stable iff at least 60% of the footprint is supported with all four
    corners on support, or at least 80% with three corners, or at least
    95% regardless of corners.  Comparisons are exact integer arithmetic
    so boundary cases never depend on float rounding.
    """
    c, a = stats.supported_cells, stats.area
    if 5 * c >= 3 * a and stats.corners == 4:
        return True
    if 5 * c >= 4 * a and stats.corners >= 3:
        return True
    return 20 * c >= 19 * a


def is_feasible(
    height_map: HeightMap, item: Item, orientation: Orientation, x: int, y: int
) -> bool:
    """True iff the drop stays in bounds, under the ceiling, and stable."""
    le, we = item.footprint(orientation)
    bin = height_map.bin
    if x < 0 or y < 0 or x + le > bin.L or y + we > bin.W:
        return False
    if int(height_map.grid[x : x + le, y : y + we].max()) + item.h > bin.H:
        return False
    return is_stable(support_stats(height_map, item, orientation, x, y))


@dataclass(frozen=True, eq=False)
class FeasibilityMask:
    """Boolean feasibility grid per orientation.

    ``grids[i, x, y]`` answers: may the current item be dropped with
    orientation ``orientations[i]`` and its anchor over ``(x, y)``?
    Anchors whose footprint would leave the floor are always False.
    """

    bin: BinConfig
    orientations: tuple[Orientation, ...]
    grids: np.ndarray

    def __post_init__(self) -> None:
        grids = np.array(self.grids, dtype=bool)
        expected = (len(self.orientations), self.bin.L, self.bin.W)
        if grids.shape != expected:
            raise ValueError(f"mask shape {grids.shape}, expected {expected}")
        grids.setflags(write=False)
        object.__setattr__(self, "grids", grids)
        object.__setattr__(self, "orientations", tuple(self.orientations))

    def any(self) -> bool:
        return bool(self.grids.any())

    def count(self) -> int:
        return int(self.grids.sum())

    def grid_for(self, orientation: Orientation) -> np.ndarray:
        return self.grids[self.orientations.index(orientation)]

    def allows(self, action: Action) -> bool:
        if action.orientation not in self.orientations:
            return False
        if not (0 <= action.x < self.bin.L and 0 <= action.y < self.bin.W):
            return False
        return bool(self.grid_for(action.orientation)[action.x, action.y])

    def actions(self) -> list[Action]:
        """All feasible actions, ordered by flat action id."""
        out: list[Action] = []
        for i, orientation in enumerate(self.orientations):
            ys, xs = np.nonzero(self.grids[i].T)
            out.extend(
                Action(x=int(x), y=int(y), orientation=orientation) for y, x in zip(ys, xs)
            )
        return out

    def flat(self) -> list[int]:
        """0/1 values over the flat action space (see `Action.flat_index`)."""
        return [int(v) for v in np.concatenate([g.ravel(order="F") for g in self.grids])]


def compute_mask(
    height_map: HeightMap,
    item: Item,
    orientations: Sequence[Orientation] = DEFAULT_ORIENTATIONS,
) -> FeasibilityMask:
    """Feasibility of every anchor cell for each requested orientation.

    Vectorised over all anchors with sliding windows; the result agrees
    with `is_feasible` cell by cell (the test suite pins the
    equivalence against an independent voxel simulation).
    """
    bin = height_map.bin
    grid = height_map.grid
    grids = np.zeros((len(orientations), bin.L, bin.W), dtype=bool)
    for idx, orientation in enumerate(orientations):
        le, we = item.footprint(orientation)
        if le > bin.L or we > bin.W:
            continue
        windows = np.lib.stride_tricks.sliding_window_view(grid, (le, we))
        tops = windows.max(axis=(2, 3))
        fits = tops + item.h <= bin.H
        support = windows == tops[:, :, None, None]
        cells = support.sum(axis=(2, 3), dtype=np.int64)
        corners = (
            support[:, :, 0, 0].astype(np.int64)
            + support[:, :, le - 1, 0]
            + support[:, :, 0, we - 1]
            + support[:, :, le - 1, we - 1]
        )
        area = le * we
        stable = (
            ((5 * cells >= 3 * area) & (corners == 4))
            | ((5 * cells >= 4 * area) & (corners >= 3))
            | (20 * cells >= 19 * area)
        )
        grids[idx, : bin.L - le + 1, : bin.W - we + 1] = stable & fits
    return FeasibilityMask(bin=bin, orientations=tuple(orientations), grids=grids)


def block_footprint(height_map: HeightMap, x: int, y: int, le: int, we: int) -> HeightMap:
    """Raise a rectangle of columns to the ceiling.

    The lookahead search uses this to forbid anchors that would intersect
    the footprint of an item it has already committed deeper in the
    arrival order: with every blocked column at ``H`` nothing can rest on
    or overlap that rectangle any more.
    """
    _check_bounds(height_map.bin, le, we, x, y)
    grid = height_map.grid.copy()
    grid[x : x + le, y : y + we] = height_map.bin.H
    return HeightMap(grid, height_map.bin)


def reward(item: Item, bin: BinConfig) -> Fraction:
    """Per-item reward: ``10 * item volume / bin volume``, exact."""
    return Fraction(10 * item.volume, bin.volume)


class RewardMode(str, enum.Enum):
    """When an episode pays out reward."""

    STEPWISE = "stepwise"  # each placement pays its own volume share
    TERMINATION = "termination"  # one payout of 10 * utilization at the final step

    def __str__(self) -> str:  # keep CLI/report output free of "RewardMode."
        return self.value


@dataclass(frozen=True)
class PackedItem:
    """A committed placement: the item plus its anchored pose."""

    item: Item
    orientation: Orientation
    x: int
    y: int
    z: int

    @property
    def dims(self) -> tuple[int, int, int]:
        le, we = self.item.footprint(self.orientation)
        return (le, we, self.item.h)

    @property
    def volume(self) -> int:
        return self.item.volume

    @property
    def top(self) -> int:
        return self.z + self.item.h


@dataclass(frozen=True)
class EpisodeState:
    """One bin mid-episode plus the not-yet-placed tail of the arrivals.

    ``pending`` holds every remaining item in arrival order.  Policies
    may inspect the first ``k`` of them (`buffer`) but items are always
    committed strictly in arrival order; lookahead never reorders the
    physical placements, it only informs the choice for the front item.
    """

    height_map: HeightMap
    pending: tuple[Item, ...]
    k: int = 1
    orientations: tuple[Orientation, ...] = DEFAULT_ORIENTATIONS
    reward_mode: RewardMode = RewardMode.STEPWISE
    packed: tuple[PackedItem, ...] = ()
    packed_volume: int = 0
    done: bool = False

    @property
    def bin(self) -> BinConfig:
        return self.height_map.bin

    @property
    def buffer(self) -> tuple[Item, ...]:
        """The visible lookahead window: the first ``k`` pending items."""
        return self.pending[: self.k]

    @property
    def current_item(self) -> Item | None:
        return self.pending[0] if self.pending else None

    @property
    def utilization(self) -> Fraction:
        return Fraction(self.packed_volume, self.bin.volume)

    @property
    def cumulative_reward(self) -> Fraction:
        """Total reward paid so far under this state's reward mode.

        Both modes pay ``10 * utilization`` over a full episode; the
        termination mode just defers everything to the final step.
        """
        if self.reward_mode is RewardMode.TERMINATION and not self.done:
            return Fraction(0)
        return Fraction(10 * self.packed_volume, self.bin.volume)


def new_episode(
    bin: BinConfig,
    items: Iterable[Item],
    *,
    k: int = 1,
    orientations: Sequence[Orientation] = DEFAULT_ORIENTATIONS,
    reward_mode: RewardMode = RewardMode.STEPWISE,
) -> EpisodeState:
    """Fresh episode over an empty bin; ``done`` if the first item has no feasible drop."""
    if k < 1:
        raise ValueError(f"lookahead size k must be >= 1, got {k}")
    items = tuple(items)
    orientations = tuple(orientations)
    if not orientations:
        raise ValueError("at least one orientation is required")
    height_map = HeightMap.empty(bin)
    done = not items or not compute_mask(height_map, items[0], orientations).any()
    return EpisodeState(
        height_map=height_map,
        pending=items,
        k=k,
        orientations=orientations,
        reward_mode=reward_mode,
        done=done,
    )


def step(state: EpisodeState, action: Action) -> tuple[EpisodeState, Fraction]:
    """Commit the front pending item at ``action`` and advance the episode.

    Infeasible actions raise `PlacementInfeasible` — the engine never
    silently corrects a placement.  The episode ends when the arrival
    sequence is exhausted or the new front item has no feasible drop.
    """
    if state.done:
        raise PackingError("episode is already finished")
    item = state.pending[0]
    le, we = item.footprint(action.orientation)
    bin = state.bin
    if action.orientation not in state.orientations:
        raise PlacementInfeasible(
            f"orientation {action.orientation!r} is not enabled for this episode"
        )
    if action.x < 0 or action.y < 0 or action.x + le > bin.L or action.y + we > bin.W:
        raise PlacementInfeasible(f"footprint out of bounds at ({action.x}, {action.y})")
    if not is_feasible(state.height_map, item, action.orientation, action.x, action.y):
        raise PlacementInfeasible(
            f"item {item.dims} cannot rest at ({action.x}, {action.y}, {action.orientation!r})"
        )
    z = rest_height(state.height_map, le, we, action.x, action.y)
    height_map = place(state.height_map, item, action.orientation, action.x, action.y)
    pending = state.pending[1:]
    packed = state.packed + (
        PackedItem(item=item, orientation=action.orientation, x=action.x, y=action.y, z=z),
    )
    packed_volume = state.packed_volume + item.volume
    done = not pending or not compute_mask(height_map, pending[0], state.orientations).any()
    next_state = replace(
        state,
        height_map=height_map,
        pending=pending,
        packed=packed,
        packed_volume=packed_volume,
        done=done,
    )
    if state.reward_mode is RewardMode.TERMINATION:
        pay = Fraction(10 * packed_volume, bin.volume) if done else Fraction(0)
    else:
        pay = reward(item, bin)
    return next_state, pay
