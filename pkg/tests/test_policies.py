"""Placement policies, spare-box enumeration and value estimators."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from binpack3d import _kernels
from binpack3d.core import (
    Action,
    BOTH_ORIENTATIONS,
    BinConfig,
    EpisodeState,
    HeightMap,
    Item,
    NoFeasibleAction,
    Orientation,
    compute_mask,
    new_episode,
    place,
    rest_height,
    step,
)
from binpack3d.datagen import ItemSet
from binpack3d.policies import (
    BoundaryRulePolicy,
    DblPolicy,
    FreeVolumeValue,
    GreedyFitValue,
    PolicyDecision,
    RandomFeasiblePolicy,
    SpareCuboid,
    VALUE_ESTIMATORS,
    ZeroValue,
    boundary_rule_policy,
    dbl_policy,
    fit_count_table,
    heuristic_value,
    maximal_spare_cuboids,
    random_feasible_policy,
    spare_cuboid_score,
)

from oracles import enumerate_maximal_free_boxes, random_voxel_stack

BIN10 = BinConfig(10, 10, 10)
SET64 = ItemSet.canonical(2, 5)


def random_state(rng, bin=BIN10, pending=(Item(2, 2, 2),), orientations=BOTH_ORIENTATIONS):
    vox = random_voxel_stack(rng, bin.L, bin.W, bin.H)
    return EpisodeState(
        height_map=HeightMap(vox.height_map(), bin),
        pending=tuple(pending),
        orientations=tuple(orientations),
    )


class TestMaximalSpareCuboids:
    def test_empty_bin_is_one_box(self):
        boxes = maximal_spare_cuboids(HeightMap.empty(BIN10))
        assert boxes == [SpareCuboid(0, 0, 0, 10, 10, 10)]

    def test_single_item_leaves_two_boxes(self):
        m = place(HeightMap.empty(BIN10), Item(4, 10, 3), Orientation.IDENTITY, 0, 0)
        boxes = set(maximal_spare_cuboids(m))
        assert boxes == {
            SpareCuboid(0, 0, 3, 10, 10, 7),  # everything above the item
            SpareCuboid(4, 0, 0, 6, 10, 10),  # the floor strip beside it
        }

    def test_full_bin_has_no_boxes(self):
        grid = np.full((10, 10), 10, dtype=np.int64)
        assert maximal_spare_cuboids(HeightMap(grid, BIN10)) == []

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(2024)
        for _ in range(40):
            vox = random_voxel_stack(rng, 10, 10, 10)
            grid = vox.height_map()
            got = {
                (c.x, c.y, c.z, c.l, c.w, c.h)
                for c in maximal_spare_cuboids(HeightMap(grid, BIN10))
            }
            assert got == enumerate_maximal_free_boxes(grid, 10)

    def test_matches_exhaustive_enumeration_odd_bins(self):
        rng = np.random.default_rng(55)
        for bin in (BinConfig(6, 9, 7), BinConfig(12, 4, 11), BinConfig(1, 8, 5)):
            for _ in range(12):
                vox = random_voxel_stack(rng, bin.L, bin.W, bin.H, dim_max=3)
                grid = vox.height_map()
                got = {
                    (c.x, c.y, c.z, c.l, c.w, c.h)
                    for c in maximal_spare_cuboids(HeightMap(grid, bin))
                }
                assert got == enumerate_maximal_free_boxes(grid, bin.H)


class TestFitTableAndScore:
    def test_fit_table_counts_types_once(self):
        table = fit_count_table(SET64, BIN10)
        assert table[10, 10, 10] == 64
        assert table[3, 3, 3] == 8  # the {2,3}^3 corner of the set
        assert table[1, 1, 1] == 0
        assert table[2, 2, 2] == 1
        # swap symmetry: a 2x5 slot holds the same types as a 5x2 slot
        assert np.array_equal(table[2, 5], table[5, 2])

    def test_fit_table_matches_direct_count(self):
        table = fit_count_table(SET64, BIN10)
        rng = np.random.default_rng(8)
        for _ in range(60):
            a, b, c = (int(v) for v in rng.integers(0, 11, size=3))
            direct = sum(
                1
                for it in SET64.items
                if it.h <= c and ((it.l <= a and it.w <= b) or (it.w <= a and it.l <= b))
            )
            assert table[a, b, c] == direct

    def test_score_examples(self):
        whole = SpareCuboid(0, 0, 0, 10, 10, 10)
        assert spare_cuboid_score(whole, SET64, BIN10) == 75  # 64 types + 1 + bonus 10
        assert spare_cuboid_score(SpareCuboid(0, 0, 9, 3, 3, 3), SET64, BIN10) == Fraction(
            8 * 1000 + 27, 1000
        )
        assert spare_cuboid_score(SpareCuboid(0, 0, 9, 1, 1, 1), SET64, BIN10) == Fraction(1, 1000)


def _reference_boundary_table(state, mask, item_set, aggregate):
    """Exact per-anchor boundary scores via the exhaustive box oracle."""
    item = state.current_item
    bin = state.bin
    n_types = len(item_set.items)
    table = {}
    for oi, orientation in enumerate(mask.orientations):
        le, we = item.footprint(orientation)
        for x in range(bin.L):
            for y in range(bin.W):
                if not mask.grids[oi, x, y]:
                    continue
                z = rest_height(state.height_map, le, we, x, y)
                virtual = place(state.height_map, item, orientation, x, y)
                boxes = enumerate_maximal_free_boxes(np.asarray(virtual.grid), bin.H)
                scores = []
                for (_, _, _, dl, dw, dh) in boxes:
                    fit = sum(
                        1
                        for it in item_set.items
                        if it.h <= dh
                        and ((it.l <= dl and it.w <= dw) or (it.w <= dl and it.l <= dw))
                    )
                    s = fit + Fraction(dl * dw * dh, bin.volume)
                    if fit == n_types:
                        s += 10
                    scores.append(s)
                if aggregate == "mean":
                    value = (
                        sum(scores, Fraction(0)) / len(scores) if scores else Fraction(0)
                    )
                else:
                    value = sum(scores, Fraction(0))
                table[(oi, x, y)] = (value, z, len(boxes))
    return table


def _reference_argmax(table):
    best_key, best_val = None, None
    for (oi, x, y), (value, z, _n) in table.items():
        cand = (value, (z, y, x, oi))
        if best_val is None or cand[0] > best_val[0] or (
            cand[0] == best_val[0] and cand[1] < best_val[1]
        ):
            best_key, best_val = (oi, x, y), cand
    return best_key


class TestBoundaryRule:
    @pytest.mark.parametrize("aggregate", ["mean", "sum"])
    def test_matches_exact_reference(self, aggregate):
        rng = np.random.default_rng(31)
        for case in range(12):
            item = Item(int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(2, 6)))
            state = random_state(rng, pending=(item,))
            mask = compute_mask(state.height_map, item, state.orientations)
            if not mask.any():
                continue
            reference = _reference_boundary_table(state, mask, SET64, aggregate)
            decision = boundary_rule_policy(state, mask, SET64, aggregate=aggregate)
            oi, x, y = _reference_argmax(reference)
            assert decision.action == Action(
                x=x, y=y, orientation=mask.orientations[oi]
            ), f"case {case}"
            # the float score surface must match the reference bit for bit
            binvol = state.bin.volume
            for (roi, rx, ry), (value, _z, n_boxes) in reference.items():
                num, den = value.numerator, value.denominator
                if aggregate == "mean" and n_boxes > 0:
                    expect = np.float64(num * (n_boxes * binvol // den)) / np.float64(
                        n_boxes * binvol
                    )
                else:
                    expect = np.float64(num * (binvol // den)) / np.float64(binvol)
                got = decision.score_map[roi, rx, ry]
                assert got == expect, f"case {case} anchor {(roi, rx, ry)}"
            infeasible = ~np.asarray(mask.grids)
            assert np.all(np.isneginf(decision.score_map[infeasible]))

    def test_empty_bin_prefers_the_origin_corner(self):
        state = new_episode(BIN10, [Item(3, 2, 4)], orientations=BOTH_ORIENTATIONS)
        mask = compute_mask(state.height_map, state.current_item, state.orientations)
        decision = boundary_rule_policy(state, mask, SET64)
        assert (decision.action.x, decision.action.y) == (0, 0)

    def test_raises_without_feasible_anchor(self):
        full = HeightMap(np.full((10, 10), 10, dtype=np.int64), BIN10)
        state = EpisodeState(height_map=full, pending=(Item(2, 2, 2),))
        mask = compute_mask(full, Item(2, 2, 2))
        with pytest.raises(NoFeasibleAction):
            boundary_rule_policy(state, mask, SET64)

    def test_rejects_unknown_aggregate(self):
        state = new_episode(BIN10, [Item(2, 2, 2)])
        mask = compute_mask(state.height_map, Item(2, 2, 2))
        with pytest.raises(ValueError):
            boundary_rule_policy(state, mask, SET64, aggregate="median")

    def test_policy_object_is_deterministic(self):
        policy = BoundaryRulePolicy(SET64)
        rng = np.random.default_rng(5)
        state = random_state(rng, pending=(Item(3, 3, 3),))
        mask = compute_mask(state.height_map, state.current_item, state.orientations)
        a = policy(state, mask)
        b = policy(state, mask)
        assert a.action == b.action
        assert np.array_equal(a.score_map, b.score_map)


class TestKernelsAgainstPython:
    def test_mask_kernel_matches_compute_mask(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            vox = random_voxel_stack(rng, 10, 10, 10)
            m = HeightMap(vox.height_map(), BIN10)
            item = Item(int(rng.integers(1, 7)), int(rng.integers(1, 7)), int(rng.integers(1, 7)))
            got = _kernels.feasibility_mask_kernel(m.grid, 10, item.l, item.w, item.h, 2)
            want = compute_mask(m, item, BOTH_ORIENTATIONS).grids
            assert np.array_equal(got, want)

    @pytest.mark.parametrize("scale", [Fraction(1), Fraction(1000), Fraction(3, 7)])
    def test_score_kernel_counts_match_box_enumeration(self, scale):
        rng = np.random.default_rng(23)
        table = fit_count_table(SET64, BIN10)
        unit_den = 1000 * scale.denominator
        for _ in range(15):
            item = Item(int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(2, 6)))
            state = random_state(rng, pending=(item,))
            mask = compute_mask(state.height_map, item, state.orientations)
            dims = np.array([item.footprint(o) for o in mask.orientations], dtype=np.int64)
            sums, counts, rests = _kernels.boundary_score_kernel(
                state.height_map.grid, 10, item.h, dims, mask.grids, table, 64,
                scale.numerator, scale.denominator,
            )
            for oi, orientation in enumerate(mask.orientations):
                for x in range(10):
                    for y in range(10):
                        if not mask.grids[oi, x, y]:
                            assert counts[oi, x, y] == -1
                            continue
                        virtual = place(state.height_map, item, orientation, x, y)
                        boxes = maximal_spare_cuboids(virtual)
                        assert counts[oi, x, y] == len(boxes)
                        total = sum(
                            (
                                spare_cuboid_score(c, SET64, BIN10, table, volume_scale=scale)
                                for c in boxes
                            ),
                            Fraction(0),
                        )
                        assert Fraction(int(sums[oi, x, y]), unit_den) == total
                        le, we = item.footprint(orientation)
                        assert rests[oi, x, y] == rest_height(state.height_map, le, we, x, y)


class TestBaselinePolicies:
    def test_dbl_prefers_deepest_then_bottom_left(self):
        grid = np.zeros((10, 10), dtype=np.int64)
        grid[0:5, :] = 3  # a raised shelf along low x
        state = EpisodeState(height_map=HeightMap(grid, BIN10), pending=(Item(2, 2, 2),))
        mask = compute_mask(state.height_map, state.current_item, state.orientations)
        decision = dbl_policy(state, mask)
        assert decision.action == Action(5, 0)  # deepest spot with smallest y, x

    def test_dbl_orientation_tie_prefers_first_listed(self):
        state = new_episode(BIN10, [Item(2, 3, 2)], orientations=BOTH_ORIENTATIONS)
        mask = compute_mask(state.height_map, state.current_item, state.orientations)
        decision = dbl_policy(state, mask)
        assert decision.action == Action(0, 0, Orientation.IDENTITY)

    def test_random_policy_is_uniform_and_seedable(self):
        state = new_episode(BIN10, [Item(6, 6, 2)])
        mask = compute_mask(state.height_map, state.current_item, state.orientations)
        n = mask.count()
        assert n == 25
        counts = np.zeros(n, dtype=np.int64)
        actions = {a: i for i, a in enumerate(mask.actions())}
        rng = np.random.default_rng(100)
        for _ in range(2500):
            counts[actions[random_feasible_policy(state, mask, rng).action]] += 1
        from scipy import stats as scipy_stats

        assert scipy_stats.chisquare(counts).pvalue > 1e-3
        # same seed, same stream
        p1 = RandomFeasiblePolicy(np.random.default_rng(4))
        p2 = RandomFeasiblePolicy(np.random.default_rng(4))
        assert [p1(state, mask).action for _ in range(10)] == [
            p2(state, mask).action for _ in range(10)
        ]

    def test_policies_raise_on_empty_mask(self):
        state = new_episode(BIN10, [Item(2, 2, 2)])
        empty = compute_mask(HeightMap.empty(BIN10), Item(11, 11, 11))
        with pytest.raises(NoFeasibleAction):
            dbl_policy(state, empty)
        with pytest.raises(NoFeasibleAction):
            random_feasible_policy(state, empty, np.random.default_rng(0))


class TestValueEstimators:
    def test_zero(self):
        assert ZeroValue()(HeightMap.empty(BIN10), Item(2, 2, 2), (Orientation.IDENTITY,)) == 0

    def test_free_volume(self):
        v = FreeVolumeValue()
        assert v(HeightMap.empty(BIN10), None, (Orientation.IDENTITY,)) == 10
        after = place(HeightMap.empty(BIN10), Item(2, 2, 2), Orientation.IDENTITY, 0, 0)
        assert v(after, None, (Orientation.IDENTITY,)) == Fraction(9920, 1000)

    def test_greedy_fit(self):
        v = GreedyFitValue()
        empty = HeightMap.empty(BIN10)
        assert v(empty, Item(2, 2, 2), (Orientation.IDENTITY,)) == Fraction(2, 25)
        assert v(empty, None, (Orientation.IDENTITY,)) == 0
        tall = HeightMap(np.full((10, 10), 9, dtype=np.int64), BIN10)
        assert v(tall, Item(2, 2, 2), (Orientation.IDENTITY,)) == 0
        # the swapped orientation can rescue a footprint that is too long
        narrow = HeightMap(np.zeros((10, 10), dtype=np.int64), BinConfig(10, 10, 10))
        assert v(narrow, Item(2, 11, 2), (Orientation.IDENTITY,)) == 0

    def test_heuristic_value_defaults_to_free_volume(self):
        state = new_episode(BIN10, [Item(2, 2, 2)])
        assert heuristic_value(state, None) == 10
        assert heuristic_value(state, None, ZeroValue()) == 0

    def test_registry(self):
        assert set(VALUE_ESTIMATORS) == {"zero", "greedy-fit", "free-volume"}
        for name, factory in VALUE_ESTIMATORS.items():
            assert factory().name == name
