"""Permutation lookahead over the visible item buffer.

With a buffer of ``k`` upcoming items the interesting question is:
which placement of the *front* item stays good no matter how we would
like to re-order the rest?  The search explores virtual placement
orders of the buffered items.  Whenever an item is placed before an
item that actually arrives earlier, the earlier item must not disturb
it, so the later item's footprint is walled off for all earlier ones
(`block_footprint` semantics via `constrained_mask`).  Because of that
rule every explored ordering maps back to a plan that can be committed
strictly in arrival order.

Two searchers share these semantics: a Monte-Carlo tree search over
permutations (any simulation budget, any ``k``) and an exhaustive
``k!`` enumeration used as the quality yardstick for small ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from binpack3d import _kernels
from binpack3d.core import (
    Action,
    BOTH_ORIENTATIONS,
    DEFAULT_ORIENTATIONS,
    EpisodeState,
    FeasibilityMask,
    HeightMap,
    Item,
    NoFeasibleAction,
    Orientation,
    PackingError,
    compute_mask,
    place,
    reward,
)
from binpack3d.policies import (
    BoundaryRulePolicy,
    FreeVolumeValue,
    Policy,
    ValueEstimator,
    ZeroValue,
    fit_count_table,
)


class SearchLimitExceeded(PackingError):
    """The exhaustive searcher refuses factorially large buffers."""


@dataclass(frozen=True)
class SearchBudget:
    """Effort and exploration knobs for the tree search."""

    simulations: int = 600
    exploration: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.simulations < 1:
            raise ValueError(f"simulations must be >= 1, got {self.simulations}")
        if self.exploration < 0:
            raise ValueError(f"exploration must be >= 0, got {self.exploration}")


@dataclass(frozen=True)
class VirtualPlacement:
    """Footprint of an item the search has already committed, by arrival index."""

    index: int
    x: int
    y: int
    le: int
    we: int


def constrained_mask(
    height_map: HeightMap,
    placements: Sequence[VirtualPlacement],
    item: Item,
    item_index: int,
    orientations: Sequence[Orientation] = DEFAULT_ORIENTATIONS,
) -> FeasibilityMask:
    """Feasibility for ``item`` given the search's earlier commitments.

    Footprints of items that arrive *after* ``item`` but were already
    placed by the search are raised to the ceiling first: the earlier
    item must keep clear of floor space those placements rely on.
    Items that arrive before ``item`` are real geometry already.
    """
    blocked = [p for p in placements if p.index > item_index]
    if blocked:
        grid = height_map.grid.copy()
        for p in blocked:
            grid[p.x : p.x + p.le, p.y : p.y + p.we] = height_map.bin.H
        height_map = HeightMap(grid, height_map.bin)
    return compute_mask(height_map, item, orientations)


@dataclass(frozen=True)
class SearchStats:
    """Outcome of one search call, for diagnostics and quality tests."""

    action: Action
    root_value: Fraction
    simulations: int
    nodes: int
    fast_path: bool


class _Node:
    __slots__ = (
        "parent",
        "item_index",
        "action",
        "height_map",
        "placements",
        "remaining",
        "path_reward",
        "children",
        "visits",
        "q",
        "failed",
    )

    def __init__(self, parent, item_index, action, height_map, placements, remaining,
                 path_reward, failed=False):
        self.parent = parent
        self.item_index = item_index
        self.action = action
        self.height_map = height_map
        self.placements = placements
        self.remaining = remaining  # sorted arrival indices still to place
        self.path_reward = path_reward
        self.children: list[_Node] = []
        self.visits = 0
        self.q: Fraction | None = None
        self.failed = failed


class _FastPath:
    """Adapter running policy calls and rollouts through the compiled kernel."""

    def __init__(self, state: EpisodeState, policy: BoundaryRulePolicy,
                 value: ValueEstimator, items: Sequence[Item]):
        self.bin = state.bin
        self.H = state.bin.H
        self.n_orient = len(state.orientations)
        self.fit_table = fit_count_table(policy.item_set, state.bin)
        self.n_types = len(policy.item_set.items)
        self.aggregate_mean = policy.aggregate == "mean"
        scale = Fraction(policy.volume_scale)
        self.scale_num = scale.numerator
        self.scale_den = scale.denominator
        self.add_free_volume = isinstance(value, FreeVolumeValue)
        self.dims = np.array([item.dims for item in items], dtype=np.int64)

    @staticmethod
    def supports(state: EpisodeState, policy, value) -> bool:
        if not isinstance(policy, BoundaryRulePolicy):
            return False
        if not isinstance(value, (FreeVolumeValue, ZeroValue)):
            return False
        if state.orientations not in (DEFAULT_ORIENTATIONS, BOTH_ORIENTATIONS):
            return False
        bin = state.bin
        scale = Fraction(policy.volume_scale)
        sn, sd = scale.numerator, scale.denominator
        # int64 headroom for the cross-multiplied score comparison: one box
        # contributes at most ((n_types+11)*sd + sn)*binvol units, there are
        # at most binvol boxes, and the mean-mode denominator is at most
        # binvol**2 * sd
        bound = ((len(policy.item_set.items) + 11) * sd + sn) * sd * bin.volume**4
        return bound < 2**62

    def _blocks(self, placements: tuple[VirtualPlacement, ...]) -> np.ndarray:
        if not placements:
            return np.empty((0, 5), dtype=np.int64)
        return np.array(
            [(p.index, p.x, p.y, p.le, p.we) for p in placements], dtype=np.int64
        )

    def pick(self, node: _Node, index: int):
        """One policy call: (action, rest height, next height map) or None."""
        placed, _vol, _free, first, grid = _kernels.boundary_rollout_kernel(
            node.height_map.grid,
            self.H,
            self.dims[index : index + 1],
            np.array([index], dtype=np.int64),
            self._blocks(node.placements),
            self.n_orient,
            self.fit_table,
            self.n_types,
            self.aggregate_mean,
            self.scale_num,
            self.scale_den,
        )
        if placed == 0:
            return None
        action = Action(x=int(first[1]), y=int(first[2]), orientation=Orientation(int(first[0])))
        return action, int(first[3]), HeightMap(grid, self.bin)

    def rollout(self, node: _Node) -> Fraction:
        indices = np.array(node.remaining, dtype=np.int64)
        placed, vol, free, _first, _grid = _kernels.boundary_rollout_kernel(
            node.height_map.grid,
            self.H,
            self.dims[indices] if len(indices) else self.dims[:0],
            indices,
            self._blocks(node.placements),
            self.n_orient,
            self.fit_table,
            self.n_types,
            self.aggregate_mean,
            self.scale_num,
            self.scale_den,
        )
        total = Fraction(10 * int(vol), self.bin.volume)
        if placed == len(node.remaining) and self.add_free_volume:
            total += Fraction(10 * int(free), self.bin.volume)
        return total


class _PermutationSearch:
    def __init__(
        self,
        state: EpisodeState,
        lookahead: Sequence[Item],
        policy: Policy,
        value: ValueEstimator,
        budget: SearchBudget,
        last_item: Item | None,
        fast: bool | None,
    ):
        if not lookahead:
            raise ValueError("lookahead must contain at least one item")
        if tuple(lookahead) != state.pending[: len(lookahead)]:
            raise ValueError("lookahead must be a prefix of the pending arrivals")
        self.state = state
        self.items = tuple(lookahead)
        self.policy = policy
        self.value = value
        self.budget = budget
        self.last_item = last_item
        self.rng = np.random.default_rng(budget.seed)
        self.nodes = 1
        use_fast = _FastPath.supports(state, policy, value) if fast is None else fast
        if use_fast and not _FastPath.supports(state, policy, value):
            raise ValueError("fast path requested but unsupported for this configuration")
        self.fast = _FastPath(state, policy, value, self.items) if use_fast else None

    # -- Monte-Carlo pieces ------------------------------------------------

    def best_child(self, node: _Node, exploration: float) -> _Node:
        best, best_score = None, -math.inf
        for child in node.children:
            q = -math.inf if child.q is None else float(child.q)
            score = q + exploration * math.sqrt(node.visits / (1 + child.visits))
            if score > best_score:
                best, best_score = child, score
        assert best is not None
        return best

    def tree_policy(self, root: _Node) -> _Node:
        node = root
        while not node.failed and node.remaining:
            if len(node.children) < len(node.remaining):
                return self.expand(node)
            node = self.best_child(node, self.budget.exploration)
        return node

    def expand(self, node: _Node) -> _Node:
        used = {child.item_index for child in node.children}
        unused = [i for i in node.remaining if i not in used]
        index = unused[0] if len(unused) == 1 else unused[int(self.rng.integers(0, len(unused)))]
        item = self.items[index]
        remaining = tuple(i for i in node.remaining if i != index)
        if self.fast is not None:
            picked = self.fast.pick(node, index)
        else:
            mask = constrained_mask(
                node.height_map, node.placements, item, index, self.state.orientations
            )
            if mask.any():
                decision = self.policy(self._policy_state(node, item), mask)
                action = decision.action
                picked = (
                    action,
                    0,  # rest height is not needed here
                    place(node.height_map, item, action.orientation, action.x, action.y),
                )
            else:
                picked = None
        if picked is None:
            child = _Node(
                parent=node,
                item_index=index,
                action=None,
                height_map=node.height_map,
                placements=node.placements,
                remaining=remaining,
                path_reward=node.path_reward,
                failed=True,
            )
        else:
            action, _rest, height_map = picked
            le, we = item.footprint(action.orientation)
            child = _Node(
                parent=node,
                item_index=index,
                action=action,
                height_map=height_map,
                placements=node.placements
                + (VirtualPlacement(index, action.x, action.y, le, we),),
                remaining=remaining,
                path_reward=node.path_reward + reward(item, self.state.bin),
            )
        node.children.append(child)
        self.nodes += 1
        return child

    def _policy_state(self, node: _Node, item: Item) -> EpisodeState:
        return EpisodeState(
            height_map=node.height_map,
            pending=(item,),
            k=1,
            orientations=self.state.orientations,
        )

    def rollout(self, node: _Node) -> Fraction:
        """Play the node's remaining items in arrival order via the policy.

        Stops at the first item without a feasible anchor; the leaf value
        estimate is added only when everything got placed.
        """
        if node.failed:
            return Fraction(0)
        if self.fast is not None:
            return self.fast.rollout(node)
        height_map = node.height_map
        total = Fraction(0)
        for index in node.remaining:
            item = self.items[index]
            mask = constrained_mask(
                height_map, node.placements, item, index, self.state.orientations
            )
            if not mask.any():
                return total
            decision = self.policy(
                EpisodeState(
                    height_map=height_map,
                    pending=(item,),
                    k=1,
                    orientations=self.state.orientations,
                ),
                mask,
            )
            action = decision.action
            height_map = place(height_map, item, action.orientation, action.x, action.y)
            total += reward(item, self.state.bin)
        total += self.value(height_map, self.last_item, self.state.orientations)
        return total

    def backup(self, node: _Node, delta: Fraction) -> None:
        current: _Node | None = node
        while current is not None:
            current.visits += 1
            current.q = delta if current.q is None else max(current.q, delta)
            current = current.parent

    def run(self) -> SearchStats:
        root = _Node(
            parent=None,
            item_index=None,
            action=None,
            height_map=self.state.height_map,
            placements=(),
            remaining=tuple(range(len(self.items))),
            path_reward=Fraction(0),
        )
        for _ in range(self.budget.simulations):
            node = self.tree_policy(root)
            delta = node.path_reward + self.rollout(node)
            self.backup(node, delta)
        action = self._choose(root)
        assert root.q is not None
        return SearchStats(
            action=action,
            root_value=root.q,
            simulations=self.budget.simulations,
            nodes=self.nodes,
            fast_path=self.fast is not None,
        )

    def _choose(self, root: _Node) -> Action:
        node = root
        while True:
            if not node.children:
                return self._fallback()
            node = self.best_child(node, 0.0)
            if node.item_index == 0:
                if node.failed or node.action is None:
                    return self._fallback()
                return node.action

    def _fallback(self) -> Action:
        """Place the front item as if there were no lookahead at all."""
        item = self.items[0]
        mask = compute_mask(self.state.height_map, item, self.state.orientations)
        if not mask.any():
            raise NoFeasibleAction("front item has no feasible anchor")
        if self.fast is not None:
            root = _Node(None, None, None, self.state.height_map, (), (0,), Fraction(0))
            picked = self.fast.pick(root, 0)
            assert picked is not None
            return picked[0]
        return self.policy(self._policy_state_root(item), mask).action

    def _policy_state_root(self, item: Item) -> EpisodeState:
        return EpisodeState(
            height_map=self.state.height_map,
            pending=(item,),
            k=1,
            orientations=self.state.orientations,
        )


def mcts_search(
    state: EpisodeState,
    lookahead: Sequence[Item],
    policy: Policy,
    value: ValueEstimator,
    budget: SearchBudget = SearchBudget(),
    *,
    last_item: Item | None = None,
    fast: bool | None = None,
) -> Action:
    """Monte-Carlo permutation search; returns the front item's placement.

    Same seed, same inputs — same action.  ``fast=None`` auto-selects a
    compiled implementation when the policy/value pair supports it; the
    compiled and plain paths produce identical results.
    """
    return mcts_search_stats(
        state, lookahead, policy, value, budget, last_item=last_item, fast=fast
    ).action


def mcts_search_stats(
    state: EpisodeState,
    lookahead: Sequence[Item],
    policy: Policy,
    value: ValueEstimator,
    budget: SearchBudget = SearchBudget(),
    *,
    last_item: Item | None = None,
    fast: bool | None = None,
) -> SearchStats:
    """`mcts_search` plus root value and tree-size diagnostics."""
    if last_item is None and len(state.pending) > len(lookahead):
        last_item = state.pending[len(lookahead)]
    search = _PermutationSearch(state, lookahead, policy, value, budget, last_item, fast)
    return search.run()


@dataclass(frozen=True)
class BruteForceResult:
    action: Action
    value: Fraction
    permutation: tuple[int, ...]


def brute_force_search(
    state: EpisodeState,
    lookahead: Sequence[Item],
    policy: Policy,
    value: ValueEstimator,
    *,
    last_item: Item | None = None,
    max_items: int = 8,
) -> Action:
    """Exhaustive version of `mcts_search`: try every placement order."""
    return brute_force_search_stats(
        state, lookahead, policy, value, last_item=last_item, max_items=max_items
    ).action


def brute_force_search_stats(
    state: EpisodeState,
    lookahead: Sequence[Item],
    policy: Policy,
    value: ValueEstimator,
    *,
    last_item: Item | None = None,
    max_items: int = 8,
) -> BruteForceResult:
    """Evaluate all ``k!`` placement orders and return the best plan.

    An order counts only when every buffered item gets placed; its value
    is the sum of placement rewards plus the leaf estimate.  Ties keep
    the lexicographically first order (by arrival indices).  Raises
    `SearchLimitExceeded` above ``max_items`` and `NoFeasibleAction`
    when no order places everything.
    """
    if not lookahead:
        raise ValueError("lookahead must contain at least one item")
    if tuple(lookahead) != state.pending[: len(lookahead)]:
        raise ValueError("lookahead must be a prefix of the pending arrivals")
    k = len(lookahead)
    if k > max_items:
        raise SearchLimitExceeded(f"{k}! orderings is beyond the limit of {max_items}!")
    if last_item is None and len(state.pending) > k:
        last_item = state.pending[k]
    items = tuple(lookahead)
    best: BruteForceResult | None = None
    for perm in itertools.permutations(range(k)):
        height_map = state.height_map
        placements: tuple[VirtualPlacement, ...] = ()
        total = Fraction(0)
        front_action: Action | None = None
        complete = True
        for index in perm:
            item = items[index]
            mask = constrained_mask(
                height_map, placements, item, index, state.orientations
            )
            if not mask.any():
                complete = False
                break
            decision = policy(
                EpisodeState(
                    height_map=height_map,
                    pending=(item,),
                    k=1,
                    orientations=state.orientations,
                ),
                mask,
            )
            action = decision.action
            if index == 0:
                front_action = action
            le, we = item.footprint(action.orientation)
            height_map = place(height_map, item, action.orientation, action.x, action.y)
            placements += (VirtualPlacement(index, action.x, action.y, le, we),)
            total += reward(item, state.bin)
        if not complete:
            continue
        total += value(height_map, last_item, state.orientations)
        assert front_action is not None
        if best is None or total > best.value:
            best = BruteForceResult(action=front_action, value=total, permutation=perm)
    if best is None:
        raise NoFeasibleAction("no placement order packs the whole buffer")
    return best
