"""Placement policies and heuristic value estimators.

A policy maps ``(state, mask)`` to a `PolicyDecision`; it must return a
mask-true action or raise `NoFeasibleAction`, never an infeasible one.
The workhorse is the boundary rule: score every feasible anchor by how
useful the spare space left after the drop remains, preferring
placements against walls and existing stacks.

Value estimators map a height map plus the next arriving item to an
exact rational estimate of achievable future reward; the tree search
uses them at its leaves.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Protocol, Sequence

import numpy as np

from binpack3d import _kernels
from binpack3d.core import (
    Action,
    BinConfig,
    EpisodeState,
    FeasibilityMask,
    HeightMap,
    Item,
    NoFeasibleAction,
    Orientation,
    compute_mask,
    reward,
)
from binpack3d.datagen import ItemSet


@dataclass(frozen=True)
class PolicyDecision:
    """A chosen action, optionally with the per-anchor score surface.

    ``score_map`` (when present) has shape ``(orientations, L, W)`` with
    ``-inf`` on anchors the policy would refuse.
    """

    action: Action
    score_map: np.ndarray | None = None


class Policy(Protocol):
    """Anything that picks a mask-true action for the front item."""

    name: str

    def __call__(self, state: EpisodeState, mask: FeasibilityMask) -> PolicyDecision: ...


# ---------------------------------------------------------------------------
# spare boxes and the boundary rule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpareCuboid:
    """A maximal empty box above the stacks: anchor plus extents."""

    x: int
    y: int
    z: int
    l: int
    w: int
    h: int

    @property
    def volume(self) -> int:
        return self.l * self.w * self.h


def maximal_spare_cuboids(height_map: HeightMap) -> list[SpareCuboid]:
    """All maximal empty boxes above the stacks.

    Free space is upward closed, so every maximal box reaches the
    ceiling and starts at the tallest stack under its floor rectangle.
    Boxes are found per distinct surface height ``t``: maximal
    rectangles of columns at most ``t`` tall that cannot grow downwards
    and contain a column of exactly ``t`` (which pins the box bottom and
    rules out duplicates).  Sorted by ``(z, x, y, l, w)``.
    """
    grid = height_map.grid
    L, W = grid.shape
    H = height_map.bin.H
    out: list[SpareCuboid] = []
    for t in sorted({int(v) for v in grid.ravel()}):
        if t >= H:
            continue
        allowed = grid <= t
        eqpre = np.zeros((L + 1, W + 1), dtype=np.int64)
        eqpre[1:, 1:] = np.cumsum(np.cumsum(grid == t, axis=0), axis=1)
        up = np.zeros(W, dtype=np.int64)
        for x in range(L):
            up = np.where(allowed[x], up + 1, 0)
            below = allowed[x + 1] if x + 1 < L else np.zeros(W, dtype=bool)
            npre = np.zeros(W + 1, dtype=np.int64)
            npre[1:] = np.cumsum(below)
            stack: list[tuple[int, int]] = []
            for j in range(W + 1):
                hcur = int(up[j]) if j < W else 0
                start = j
                while stack and stack[-1][1] > hcur:
                    ys, hs = stack.pop()
                    if x == L - 1 or npre[j] - npre[ys] < j - ys:
                        x0 = x - hs + 1
                        eq_cells = (
                            eqpre[x + 1, j] - eqpre[x0, j] - eqpre[x + 1, ys] + eqpre[x0, ys]
                        )
                        if eq_cells > 0:
                            out.append(
                                SpareCuboid(x=x0, y=ys, z=t, l=hs, w=j - ys, h=H - t)
                            )
                    start = ys
                if hcur > 0 and (not stack or stack[-1][1] < hcur):
                    stack.append((start, hcur))
    out.sort(key=lambda c: (c.z, c.x, c.y, c.l, c.w))
    return out


@functools.lru_cache(maxsize=8)
def fit_count_table(item_set: ItemSet, bin: BinConfig) -> np.ndarray:
    """``table[a, b, c]`` = item types fitting an ``a x b x c`` box.

    A type fits when its height fits and its footprint fits as-is or
    swapped; each type counts once.  The returned array is shared and
    must not be mutated.
    """
    table = np.zeros((bin.L + 1, bin.W + 1, bin.H + 1), dtype=np.int64)
    a = np.arange(bin.L + 1)[:, None]
    b = np.arange(bin.W + 1)[None, :]
    c = np.arange(bin.H + 1)
    for item in item_set.items:
        horizontal = ((item.l <= a) & (item.w <= b)) | ((item.w <= a) & (item.l <= b))
        table += horizontal[:, :, None] & (item.h <= c)[None, None, :]
    table.setflags(write=False)
    return table


def spare_cuboid_score(
    cuboid: SpareCuboid,
    item_set: ItemSet,
    bin: BinConfig,
    fit_table: np.ndarray | None = None,
    volume_scale: Fraction | int = 1,
) -> Fraction:
    """Usefulness of one spare box, exact.

    Counts the item types that still fit, adds the box volume as a share
    of the bin volume (a tie-breaker that favours bigger boxes), and a
    bonus of 10 when every type fits.  ``volume_scale`` weights the
    volume term: at the default 1 the type count dominates and volume
    only breaks ties; at ``bin.volume`` the term becomes the raw cell
    count and dominates instead.
    """
    if fit_table is None:
        fit_table = fit_count_table(item_set, bin)
    scale = Fraction(volume_scale)
    if scale <= 0:
        raise ValueError(f"volume_scale must be positive, got {volume_scale!r}")
    fit = int(fit_table[cuboid.l, cuboid.w, cuboid.h])
    score = fit + scale * Fraction(cuboid.volume, bin.volume)
    if fit == len(item_set.items):
        score += 10
    return score


def boundary_rule_policy(
    state: EpisodeState,
    mask: FeasibilityMask,
    item_set: ItemSet,
    *,
    aggregate: str = "mean",
    volume_scale: Fraction | int = 1,
    fit_table: np.ndarray | None = None,
) -> PolicyDecision:
    """Drop the item where the leftover spare boxes stay most useful.

    Every mask-true anchor is scored by virtually dropping the item
    there and aggregating `spare_cuboid_score` over the maximal spare
    boxes of the result — the mean by default, the plain sum with
    ``aggregate="sum"``.  ``volume_scale`` weights the volume term of
    each spare box (see `spare_cuboid_score`).  The argmax is exact
    (integer cross multiplication); ties prefer the lowest rest height,
    then the smallest y, then x, then the earliest listed orientation,
    which pushes items into corners and against walls.
    """
    if aggregate not in ("mean", "sum"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    scale = Fraction(volume_scale)
    if scale <= 0:
        raise ValueError(f"volume_scale must be positive, got {volume_scale!r}")
    item = state.current_item
    if item is None or not mask.any():
        raise NoFeasibleAction("boundary rule: no feasible anchor")
    if fit_table is None:
        fit_table = fit_count_table(item_set, state.bin)
    unit_den = state.bin.volume * scale.denominator
    dims = np.array([item.footprint(o) for o in mask.orientations], dtype=np.int64)
    sums, counts, rests = _kernels.boundary_score_kernel(
        state.height_map.grid,
        state.bin.H,
        item.h,
        dims,
        mask.grids,
        fit_table,
        len(item_set.items),
        scale.numerator,
        scale.denominator,
    )
    best: tuple[int, int, int, int, int, int] | None = None  # num, den, z, y, x, oi
    for oi in range(len(mask.orientations)):
        xs, ys = np.nonzero(counts[oi] >= 0)
        for x, y in zip(xs.tolist(), ys.tolist()):
            c = int(counts[oi, x, y])
            z = int(rests[oi, x, y])
            if aggregate == "mean":
                num, den = (int(sums[oi, x, y]), c * unit_den) if c > 0 else (0, 1)
            else:
                num, den = int(sums[oi, x, y]), unit_den
            if best is None:
                better = True
            else:
                lhs, rhs = num * best[1], best[0] * den
                if lhs != rhs:
                    better = lhs > rhs
                else:
                    better = (z, y, x, oi) < (best[2], best[3], best[4], best[5])
            if better:
                best = (num, den, z, y, x, oi)
    assert best is not None
    evaluated = counts >= 0
    score_map = np.full(counts.shape, -np.inf)
    if aggregate == "mean":
        nonempty = evaluated & (counts > 0)
        score_map[nonempty] = sums[nonempty] / (counts[nonempty] * unit_den)
        score_map[evaluated & (counts == 0)] = 0.0
    else:
        score_map[evaluated] = sums[evaluated] / unit_den
    action = Action(x=best[4], y=best[3], orientation=mask.orientations[best[5]])
    return PolicyDecision(action=action, score_map=score_map)


# ---------------------------------------------------------------------------
# baseline policies
# ---------------------------------------------------------------------------


def dbl_policy(state: EpisodeState, mask: FeasibilityMask) -> PolicyDecision:
    """Deepest-bottom-left: lowest rest height, then smallest y, then x,
    then the earliest listed orientation."""
    item = state.current_item
    if item is None or not mask.any():
        raise NoFeasibleAction("deepest-bottom-left: no feasible anchor")
    grid = state.height_map.grid
    best: tuple[int, int, int, int] | None = None
    for oi, orientation in enumerate(mask.orientations):
        le, we = item.footprint(orientation)
        xs, ys = np.nonzero(mask.grids[oi])
        for x, y in zip(xs.tolist(), ys.tolist()):
            z = int(grid[x : x + le, y : y + we].max())
            key = (z, y, x, oi)
            if best is None or key < best:
                best = key
    assert best is not None
    return PolicyDecision(
        action=Action(x=best[2], y=best[1], orientation=mask.orientations[best[3]])
    )


def random_feasible_policy(
    state: EpisodeState, mask: FeasibilityMask, rng: np.random.Generator
) -> PolicyDecision:
    """Uniform draw over all mask-true (orientation, x, y) triples."""
    actions = mask.actions()
    if not actions:
        raise NoFeasibleAction("random placement: no feasible anchor")
    return PolicyDecision(action=actions[int(rng.integers(0, len(actions)))])


# ---------------------------------------------------------------------------
# configured policy objects (what runners and the search consume)
# ---------------------------------------------------------------------------


@dataclass
class BoundaryRulePolicy:
    """`boundary_rule_policy` bound to an item set, aggregate mode and
    volume-term scale."""

    item_set: ItemSet
    aggregate: str = "mean"
    volume_scale: Fraction | int = 1
    name: str = "boundary"

    def __call__(self, state: EpisodeState, mask: FeasibilityMask) -> PolicyDecision:
        return boundary_rule_policy(
            state,
            mask,
            self.item_set,
            aggregate=self.aggregate,
            volume_scale=self.volume_scale,
            fit_table=fit_count_table(self.item_set, state.bin),
        )


@dataclass
class DblPolicy:
    name: str = "dbl"

    def __call__(self, state: EpisodeState, mask: FeasibilityMask) -> PolicyDecision:
        return dbl_policy(state, mask)


@dataclass
class RandomFeasiblePolicy:
    """Uniform feasible placement; owns its rng for reproducibility."""

    rng: np.random.Generator
    name: str = "random"

    def __call__(self, state: EpisodeState, mask: FeasibilityMask) -> PolicyDecision:
        return random_feasible_policy(state, mask, self.rng)


# ---------------------------------------------------------------------------
# heuristic value estimators
# ---------------------------------------------------------------------------


class ValueEstimator(Protocol):
    """Exact rational estimate of achievable future reward."""

    name: str

    def __call__(
        self,
        height_map: HeightMap,
        next_item: Item | None,
        orientations: Sequence[Orientation],
    ) -> Fraction: ...


@dataclass(frozen=True)
class ZeroValue:
    """No credit for anything beyond the lookahead horizon."""

    name: str = "zero"

    def __call__(self, height_map, next_item, orientations) -> Fraction:
        return Fraction(0)


@dataclass(frozen=True)
class GreedyFitValue:
    """Reward of the next arriving item if it still fits anywhere, else 0."""

    name: str = "greedy-fit"

    def __call__(self, height_map, next_item, orientations) -> Fraction:
        if next_item is None:
            return Fraction(0)
        if compute_mask(height_map, next_item, orientations).any():
            return reward(next_item, height_map.bin)
        return Fraction(0)


@dataclass(frozen=True)
class FreeVolumeValue:
    """Optimistic: 10 x the free-space share, as if it could be packed solid."""

    name: str = "free-volume"

    def __call__(self, height_map, next_item, orientations) -> Fraction:
        return Fraction(10 * height_map.free_volume, height_map.bin.volume)


VALUE_ESTIMATORS: dict[str, Callable[[], ValueEstimator]] = {
    "zero": ZeroValue,
    "greedy-fit": GreedyFitValue,
    "free-volume": FreeVolumeValue,
}


def heuristic_value(
    state: EpisodeState,
    next_item: Item | None,
    estimator: ValueEstimator | None = None,
) -> Fraction:
    """Estimate future reward from an episode state (FreeVolume by default)."""
    if estimator is None:
        estimator = FreeVolumeValue()
    return estimator(state.height_map, next_item, state.orientations)
