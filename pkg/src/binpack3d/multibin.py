"""Multi-bin dispatch: route each arriving item to the bin that minds least.

Every bin carries a running value ``val``.  An arriving item ``n`` goes
to the open bin maximizing ``V(H(b), n) - b.val`` — the bin whose
estimated outlook drops least by hosting it — and the winner's ``val``
is refreshed to its current estimate.  Placement inside the chosen bin
is an ordinary single-bin policy step.

The selection rule never looks past the current item, so the dispatcher
stays strictly online.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from binpack3d.core import (
    BinConfig,
    DEFAULT_ORIENTATIONS,
    EpisodeState,
    HeightMap,
    Item,
    Orientation,
    compute_mask,
    place,
)
from binpack3d.policies import Policy, ValueEstimator

S_DEFAULT = Fraction(-1, 5)


@dataclass
class BinSlot:
    """One bin of the pool: its surface, routing value, and tallies."""

    height_map: HeightMap
    val: Fraction
    items: int = 0
    placed_volume: int = 0
    open: bool = True

    @property
    def utilization(self) -> Fraction:
        return Fraction(self.placed_volume, self.height_map.bin.volume)


class BinPool:
    """A fleet of identical bins filling side by side."""

    def __init__(self, bin: BinConfig, count: int, *, s_def: Fraction = S_DEFAULT):
        if count < 1:
            raise ValueError(f"a pool needs at least one bin, got {count}")
        self.bin = bin
        self.s_def = Fraction(s_def)
        self.slots = [
            BinSlot(height_map=HeightMap.empty(bin), val=self.s_def)
            for _ in range(count)
        ]

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def any_open(self) -> bool:
        return any(slot.open for slot in self.slots)


def select_bin(
    pool: BinPool,
    item: Item,
    value: ValueEstimator,
    orientations: Sequence[Orientation] = DEFAULT_ORIENTATIONS,
) -> int:
    """Pick the open bin maximizing ``V(H(b), item) - b.val``.

    Ties go to the lowest index.  The winner's ``val`` becomes its
    just-computed estimate; nothing is placed here, and no other bin's
    ``val`` changes.  Feasibility is not checked — a selected bin that
    cannot host the item is the caller's problem.
    """
    best_index = -1
    best_score: Fraction | None = None
    best_estimate = Fraction(0)
    for index, slot in enumerate(pool.slots):
        if not slot.open:
            continue
        estimate = value(slot.height_map, item, orientations)
        score = estimate - slot.val
        if best_score is None or score > best_score:
            best_index, best_score, best_estimate = index, score, estimate
    if best_index < 0:
        raise ValueError("no open bin to select from")
    pool.slots[best_index].val = best_estimate
    return best_index


@dataclass(frozen=True)
class BinReport:
    items: int
    placed_volume: int
    utilization: Fraction
    closed: bool


@dataclass(frozen=True)
class MultibinResult:
    """Per-bin tallies plus what happened to the item stream."""

    bin: BinConfig
    per_bin: tuple[BinReport, ...]
    placed_items: int
    dropped_items: int
    leftover_items: int
    decision_seconds: tuple[float, ...]

    @property
    def items_per_bin(self) -> Fraction:
        return Fraction(self.placed_items, len(self.per_bin))

    @property
    def mean_utilization(self) -> Fraction:
        return sum(
            (report.utilization for report in self.per_bin), Fraction(0)
        ) / len(self.per_bin)

    @property
    def mean_decision_seconds(self) -> float:
        if not self.decision_seconds:
            return 0.0
        return sum(self.decision_seconds) / len(self.decision_seconds)


def run_multibin_episode(
    bin: BinConfig,
    count: int,
    items: Iterable[Item],
    policy: Policy,
    value: ValueEstimator,
    *,
    orientations: Sequence[Orientation] = DEFAULT_ORIENTATIONS,
    on_full: str = "reroute",
    s_def: Fraction = S_DEFAULT,
    pool: BinPool | None = None,
) -> MultibinResult:
    """Stream items through bin selection plus per-bin policy steps.

    A selected bin with an all-false mask for its item closes.  With
    ``on_full="reroute"`` the item then re-enters selection among the
    remaining open bins (each further failure closes that bin too);
    ``on_full="drop"`` gives the item only its one chance.  The episode
    ends when every bin is closed or the stream is exhausted; items
    never routed count as leftover.

    ``decision_seconds`` holds one entry per *placed* item, covering
    selection through policy choice.
    """
    if on_full not in ("reroute", "drop"):
        raise ValueError(f"on_full must be 'reroute' or 'drop', got {on_full!r}")
    if pool is None:
        pool = BinPool(bin, count, s_def=s_def)
    elif pool.bin != bin or len(pool) != count:
        raise ValueError("supplied pool does not match bin/count")
    orientations = tuple(orientations)
    placed = dropped = leftover = 0
    seconds: list[float] = []
    stream = iter(items)
    for item in stream:
        if not pool.any_open:
            leftover += 1 + sum(1 for _ in stream)
            break
        start = time.perf_counter()
        action = None
        while True:
            index = select_bin(pool, item, value, orientations)
            slot = pool.slots[index]
            mask = compute_mask(slot.height_map, item, orientations)
            if mask.any():
                probe = EpisodeState(
                    height_map=slot.height_map,
                    pending=(item,),
                    k=1,
                    orientations=orientations,
                )
                action = policy(probe, mask).action
                break
            slot.open = False
            if on_full == "drop" or not pool.any_open:
                break
        if action is None:
            dropped += 1
            continue
        seconds.append(time.perf_counter() - start)
        slot.height_map = place(
            slot.height_map, item, action.orientation, action.x, action.y
        )
        slot.items += 1
        slot.placed_volume += item.volume
        placed += 1
    return MultibinResult(
        bin=bin,
        per_bin=tuple(
            BinReport(
                items=slot.items,
                placed_volume=slot.placed_volume,
                utilization=slot.utilization,
                closed=not slot.open,
            )
            for slot in pool.slots
        ),
        placed_items=placed,
        dropped_items=dropped,
        leftover_items=leftover,
        decision_seconds=tuple(seconds),
    )
