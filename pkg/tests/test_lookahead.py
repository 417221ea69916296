"""Permutation search: constrained masks, MCTS, and the exhaustive oracle."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from binpack3d.core import (
    Action,
    BOTH_ORIENTATIONS,
    BinConfig,
    DEFAULT_ORIENTATIONS,
    EpisodeState,
    HeightMap,
    Item,
    NoFeasibleAction,
    Orientation,
    compute_mask,
    new_episode,
    place,
    reward,
    step,
)
from binpack3d.datagen import ItemSet
from binpack3d.lookahead import (
    BruteForceResult,
    SearchBudget,
    SearchLimitExceeded,
    VirtualPlacement,
    brute_force_search,
    brute_force_search_stats,
    constrained_mask,
    mcts_search,
    mcts_search_stats,
)
from binpack3d.policies import (
    BoundaryRulePolicy,
    DblPolicy,
    FreeVolumeValue,
    GreedyFitValue,
    ZeroValue,
)

from oracles import random_voxel_stack

BIN10 = BinConfig(10, 10, 10)
SET10 = ItemSet.canonical(2, 5)


def rough_state(rng, bin, pending, orientations=DEFAULT_ORIENTATIONS, max_items=8):
    """Random reachable height map plus a hand-picked arrival buffer."""
    vox = random_voxel_stack(rng, bin.L, bin.W, bin.H - 5, max_items=max_items)
    grid = np.zeros((bin.L, bin.W), dtype=np.int64)
    grid[:, :] = vox.height_map()
    return EpisodeState(
        height_map=HeightMap(grid, bin),
        pending=tuple(pending),
        k=min(len(pending), 4),
        orientations=orientations,
    )


def random_items(rng, n):
    picks = rng.integers(0, len(SET10.items), size=n)
    return tuple(SET10.items[int(i)] for i in picks)


def plan_value(state, perm, items, policy, value, last_item):
    """Replay one placement order by hand; None when it cannot finish."""
    height_map = state.height_map
    placements = ()
    total = Fraction(0)
    first = None
    for index in perm:
        mask = constrained_mask(
            height_map, placements, items[index], index, state.orientations
        )
        if not mask.any():
            return None, None
        probe = EpisodeState(
            height_map=height_map,
            pending=(items[index],),
            k=1,
            orientations=state.orientations,
        )
        action = policy(probe, mask).action
        if index == 0:
            first = action
        le, we = items[index].footprint(action.orientation)
        height_map = place(height_map, items[index], action.orientation, action.x, action.y)
        placements += (VirtualPlacement(index, action.x, action.y, le, we),)
        total += reward(items[index], state.bin)
    return total + value(height_map, last_item, state.orientations), first


# ---------------------------------------------------------------------------
# constrained feasibility
# ---------------------------------------------------------------------------


def test_constrained_mask_without_placements_is_plain_mask():
    rng = np.random.default_rng(11)
    state = rough_state(rng, BIN10, random_items(rng, 1))
    item = state.pending[0]
    plain = compute_mask(state.height_map, item, BOTH_ORIENTATIONS)
    constrained = constrained_mask(state.height_map, (), item, 0, BOTH_ORIENTATIONS)
    assert np.array_equal(plain.grids, constrained.grids)


def test_constrained_mask_blocks_only_later_arrivals():
    bin = BinConfig(6, 6, 6)
    empty = HeightMap.empty(bin)
    item = Item(2, 2, 2)
    later = VirtualPlacement(index=3, x=0, y=0, le=3, we=3)
    earlier = VirtualPlacement(index=0, x=0, y=0, le=3, we=3)

    blocked = constrained_mask(empty, (later,), item, 1, DEFAULT_ORIENTATIONS)
    # anchors whose footprint touches the walled 3x3 corner disappear
    for x, y in itertools.product(range(5), range(5)):
        touches = x < 3 and y < 3
        assert blocked.allows(Action(x, y)) == (not touches)

    # the same footprint belonging to an *earlier* arrival constrains nothing
    unblocked = constrained_mask(empty, (earlier,), item, 1, DEFAULT_ORIENTATIONS)
    plain = compute_mask(empty, item, DEFAULT_ORIENTATIONS)
    assert np.array_equal(unblocked.grids, plain.grids)


def test_constrained_mask_matches_manual_walling():
    rng = np.random.default_rng(23)
    for _ in range(20):
        state = rough_state(rng, BIN10, random_items(rng, 1))
        item = state.pending[0]
        placements = []
        for index in (2, 5):
            le = int(rng.integers(1, 4))
            we = int(rng.integers(1, 4))
            x = int(rng.integers(0, BIN10.L - le + 1))
            y = int(rng.integers(0, BIN10.W - we + 1))
            placements.append(VirtualPlacement(index, x, y, le, we))
        grid = state.height_map.grid.copy()
        for p in placements:
            grid[p.x : p.x + p.le, p.y : p.y + p.we] = BIN10.H
        manual = compute_mask(HeightMap(grid, BIN10), item, BOTH_ORIENTATIONS)
        got = constrained_mask(
            state.height_map, placements, item, 1, BOTH_ORIENTATIONS
        )
        assert np.array_equal(manual.grids, got.grids)


# ---------------------------------------------------------------------------
# exhaustive search
# ---------------------------------------------------------------------------


def test_brute_force_matches_manual_enumeration():
    rng = np.random.default_rng(37)
    policy = BoundaryRulePolicy(SET10)
    value = FreeVolumeValue()
    for _ in range(6):
        items = random_items(rng, 4)
        state = rough_state(rng, BIN10, items)
        last = None
        best = None
        for perm in itertools.permutations(range(3)):
            total, first = plan_value(state, perm, items[:3], policy, value, items[3])
            if total is None:
                continue
            if best is None or total > best[0]:
                best = (total, perm, first)
        if best is None:
            with pytest.raises(NoFeasibleAction):
                brute_force_search_stats(
                    state, items[:3], policy, value, last_item=items[3]
                )
            continue
        got = brute_force_search_stats(
            state, items[:3], policy, value, last_item=items[3]
        )
        assert got.value == best[0]
        assert got.permutation == best[1]
        assert got.action == best[2]
        assert isinstance(got, BruteForceResult)


def test_brute_force_ties_keep_arrival_order():
    # an empty bin with room to spare: every order completes and, volume
    # being conserved, every complete order has the same value
    state = new_episode(BIN10, [Item(2, 2, 2)] * 3, k=3)
    got = brute_force_search_stats(
        state, state.buffer, DblPolicy(), FreeVolumeValue()
    )
    assert got.permutation == (0, 1, 2)


def test_brute_force_guard():
    items = [Item(2, 2, 2)] * 9
    state = new_episode(BIN10, items, k=9)
    with pytest.raises(SearchLimitExceeded):
        brute_force_search(state, state.buffer, DblPolicy(), ZeroValue())


def test_brute_force_rejects_bad_lookahead():
    state = new_episode(BIN10, [Item(2, 2, 2), Item(3, 3, 3)], k=2)
    with pytest.raises(ValueError):
        brute_force_search(state, [], DblPolicy(), ZeroValue())
    with pytest.raises(ValueError):
        brute_force_search(state, [Item(4, 4, 4)], DblPolicy(), ZeroValue())


# ---------------------------------------------------------------------------
# a buffer only the search can save
# ---------------------------------------------------------------------------


def terraced_state():
    """Plateaus at both ends, a three-column pit between them.

    The front item is a thin 2x2 tile, the next a 2x2x4 column that only
    fits in the pit.  Placed greedily the tile lands in the pit and kills
    the column; placing the column first forces the tile onto a plateau.
    """
    bin = BinConfig(6, 2, 4)
    state = new_episode(
        bin,
        [Item(2, 2, 3), Item(1, 2, 3), Item(2, 2, 1), Item(2, 2, 4)],
        k=2,
    )
    state, _ = step(state, Action(0, 0))
    state, _ = step(state, Action(5, 0))
    assert list(state.height_map.grid[:, 0]) == [3, 3, 0, 0, 0, 3]
    return state


def test_reordering_rescues_the_buffer():
    state = terraced_state()
    policy = DblPolicy()
    value = FreeVolumeValue()

    greedy = policy(state, compute_mask(state.height_map, state.pending[0])).action
    assert greedy == Action(2, 0)

    got = brute_force_search_stats(state, state.buffer, policy, value)
    assert got.permutation == (1, 0)
    assert got.action == Action(0, 0)
    # tile 5/6 + column 10/3 + free volume 25/12, all placed
    assert got.value == Fraction(25, 4)

    stats = mcts_search_stats(
        state, state.buffer, policy, value, SearchBudget(simulations=32, seed=5)
    )
    assert stats.action == Action(0, 0)
    assert stats.root_value == Fraction(25, 4)
    assert not stats.fast_path


def test_search_recommendation_survives_commitment():
    # committing the searched action keeps the rescued plan playable
    state = terraced_state()
    action = brute_force_search(state, state.buffer, DblPolicy(), FreeVolumeValue())
    state, _ = step(state, action)
    assert compute_mask(state.height_map, state.pending[0]).any()
    state, _ = step(state, Action(2, 0))
    assert state.utilization == Fraction(38, 48)


def test_no_order_completes():
    # the tile poisons the slab's only anchor and the slab, placed first,
    # walls off the whole floor: no order finishes the buffer
    bin = BinConfig(4, 2, 4)
    state = new_episode(bin, [Item(2, 2, 1), Item(4, 2, 3)], k=2)
    policy = DblPolicy()
    with pytest.raises(NoFeasibleAction):
        brute_force_search(state, state.buffer, policy, ZeroValue())
    # the tree search falls back to placing the front item on its own
    action = mcts_search(
        state, state.buffer, policy, ZeroValue(), SearchBudget(simulations=16, seed=1)
    )
    assert action == Action(0, 0)


def test_front_item_nowhere_raises():
    bin = BinConfig(3, 3, 3)
    state = EpisodeState(
        height_map=HeightMap.empty(bin), pending=(Item(2, 2, 4), Item(3, 3, 3)), k=2
    )
    with pytest.raises(NoFeasibleAction):
        mcts_search(state, state.pending, DblPolicy(), ZeroValue())
    with pytest.raises(NoFeasibleAction):
        brute_force_search(state, state.pending, DblPolicy(), ZeroValue())


# ---------------------------------------------------------------------------
# tree search quality and determinism
# ---------------------------------------------------------------------------


def test_two_item_search_is_exhaustive():
    # with two items a handful of simulations visits both orders, so the
    # root value must equal the exhaustive optimum exactly
    rng = np.random.default_rng(41)
    policy = BoundaryRulePolicy(SET10)
    value = GreedyFitValue()
    last = Item(5, 5, 5)
    for _ in range(10):
        items = random_items(rng, 2)
        state = rough_state(rng, BIN10, items)
        try:
            oracle = brute_force_search_stats(
                state, items, policy, value, last_item=last
            )
        except NoFeasibleAction:
            continue
        stats = mcts_search_stats(
            state, items, policy, value,
            SearchBudget(simulations=24, seed=7), last_item=last,
        )
        assert stats.root_value == oracle.value
        forward, _ = plan_value(state, (0, 1), items, policy, value, last)
        reverse, _ = plan_value(state, (1, 0), items, policy, value, last)
        if forward != reverse:
            assert stats.action == oracle.action


def test_root_value_never_beats_the_oracle():
    rng = np.random.default_rng(43)
    policy = BoundaryRulePolicy(SET10)
    value = FreeVolumeValue()
    compared = 0
    for _ in range(8):
        items = random_items(rng, 3)
        state = rough_state(rng, BIN10, items)
        try:
            oracle = brute_force_search_stats(state, items, policy, value)
        except NoFeasibleAction:
            continue
        stats = mcts_search_stats(
            state, items, policy, value, SearchBudget(simulations=60, seed=3)
        )
        assert stats.root_value <= oracle.value
        compared += 1
    assert compared >= 4


def test_same_seed_same_search():
    rng = np.random.default_rng(47)
    items = random_items(rng, 4)
    state = rough_state(rng, BIN10, items)
    budget = SearchBudget(simulations=40, seed=123)
    first = mcts_search_stats(state, items, BoundaryRulePolicy(SET10), FreeVolumeValue(), budget)
    second = mcts_search_stats(state, items, BoundaryRulePolicy(SET10), FreeVolumeValue(), budget)
    assert first == second


def test_single_item_lookahead_is_the_policy():
    rng = np.random.default_rng(53)
    policy = BoundaryRulePolicy(SET10)
    for _ in range(5):
        items = random_items(rng, 1)
        state = rough_state(rng, BIN10, items)
        mask = compute_mask(state.height_map, items[0])
        if not mask.any():
            with pytest.raises(NoFeasibleAction):
                mcts_search(
                    state, items, policy, FreeVolumeValue(),
                    SearchBudget(simulations=4, seed=0),
                )
            continue
        direct = policy(state, mask).action
        searched = mcts_search(
            state, items, policy, FreeVolumeValue(), SearchBudget(simulations=4, seed=0)
        )
        assert searched == direct


def test_budget_validation():
    with pytest.raises(ValueError):
        SearchBudget(simulations=0)
    with pytest.raises(ValueError):
        SearchBudget(exploration=-0.5)


# ---------------------------------------------------------------------------
# compiled fast path == plain path
# ---------------------------------------------------------------------------


def test_fast_path_auto_selection():
    state = new_episode(BIN10, [Item(2, 2, 2), Item(3, 3, 3)], k=2)
    budget = SearchBudget(simulations=8, seed=0)
    fast = mcts_search_stats(
        state, state.buffer, BoundaryRulePolicy(SET10), FreeVolumeValue(), budget
    )
    assert fast.fast_path
    greedy_fit = mcts_search_stats(
        state, state.buffer, BoundaryRulePolicy(SET10), GreedyFitValue(), budget
    )
    assert not greedy_fit.fast_path
    dbl = mcts_search_stats(state, state.buffer, DblPolicy(), FreeVolumeValue(), budget)
    assert not dbl.fast_path
    with pytest.raises(ValueError):
        mcts_search_stats(
            state, state.buffer, DblPolicy(), FreeVolumeValue(), budget, fast=True
        )


@pytest.mark.parametrize("orientations", [DEFAULT_ORIENTATIONS, BOTH_ORIENTATIONS])
@pytest.mark.parametrize("value_cls", [FreeVolumeValue, ZeroValue])
def test_fast_path_equals_plain_path(orientations, value_cls):
    rng = np.random.default_rng(59)
    policy = BoundaryRulePolicy(SET10)
    value = value_cls()
    for case in range(4):
        items = random_items(rng, 3 if case % 2 else 4)
        state = rough_state(rng, BIN10, items, orientations=orientations)
        budget = SearchBudget(simulations=32, seed=case)
        plain = mcts_search_stats(state, items, policy, value, budget, fast=False)
        fast = mcts_search_stats(state, items, policy, value, budget, fast=True)
        assert fast.action == plain.action
        assert fast.root_value == plain.root_value
        assert fast.nodes == plain.nodes
        assert fast.fast_path and not plain.fast_path


def test_fast_path_handles_dead_buffers():
    # fallback and failure expansion run through the kernel too
    bin = BinConfig(4, 2, 4)
    item_set = ItemSet.canonical(1, 2)
    state = new_episode(bin, [Item(2, 2, 1), Item(4, 2, 3)], k=2)
    policy = BoundaryRulePolicy(item_set)
    budget = SearchBudget(simulations=16, seed=1)
    plain = mcts_search_stats(
        state, state.buffer, policy, FreeVolumeValue(), budget, fast=False
    )
    fast = mcts_search_stats(
        state, state.buffer, policy, FreeVolumeValue(), budget, fast=True
    )
    assert fast.action == plain.action
    assert fast.root_value == plain.root_value


def test_last_item_defaults_to_the_arrival_after_the_buffer():
    rng = np.random.default_rng(61)
    items = random_items(rng, 5)
    state = rough_state(rng, BIN10, items)
    policy = BoundaryRulePolicy(SET10)
    value = GreedyFitValue()
    budget = SearchBudget(simulations=24, seed=9)
    implicit = mcts_search_stats(state, items[:4], policy, value, budget)
    explicit = mcts_search_stats(
        state, items[:4], policy, value, budget, last_item=items[4]
    )
    assert implicit == explicit
