"""Benchmark sequence generators, dataset files and ground-truth validation.

Three families of arrival sequences over a single bin:

* ``RS`` — item shapes drawn uniformly from a finite item set until the
  cumulative volume reaches the bin volume.  No ground truth exists.
* ``CUT1`` / ``CUT2`` — the bin is recursively cut into valid item-sized
  pieces (a perfect tiling), then the pieces are ordered into an arrival
  sequence: by ascending bottom height with ties shuffled (``CUT1``), or
  bottom-up following the partially rebuilt surface (``CUT2``).  The cut
  positions are the ground truth; replaying them must rebuild the bin to
  exactly 100% utilization.

Every generator takes an explicit `numpy.random.Generator`, and dataset
files round-trip byte for byte, so a dataset is fully reproducible from
``(origin, bin, count, seed)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from binpack3d.core import (
    BinConfig,
    HeightMap,
    Item,
    Orientation,
    PackedItem,
    is_feasible,
    place,
    rest_height,
)


class DatagenError(Exception):
    """Sequence generation failed (bad thresholds, corrupt tiling, ...)."""


class Origin(str, enum.Enum):
    """How an arrival sequence was produced."""

    RS = "RS"
    CUT1 = "CUT1"
    CUT2 = "CUT2"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ItemSet:
    """The finite set of box shapes a benchmark draws from."""

    items: tuple[Item, ...]
    dim_min: int
    dim_max: int

    @classmethod
    def canonical(cls, dim_min: int = 2, dim_max: int = 5) -> "ItemSet":
        """All shapes with every edge in ``[dim_min, dim_max]``, in
        lexicographic ``(l, w, h)`` order; ``type_id`` is the list index."""
        if not 1 <= dim_min <= dim_max:
            raise ValueError(f"need 1 <= dim_min <= dim_max, got {dim_min}..{dim_max}")
        span = range(dim_min, dim_max + 1)
        items = tuple(
            Item(l, w, h, type_id=i)
            for i, (l, w, h) in enumerate(
                (l, w, h) for l in span for w in span for h in span
            )
        )
        return cls(items=items, dim_min=dim_min, dim_max=dim_max)

    def __len__(self) -> int:
        return len(self.items)

    def type_index(self, l: int, w: int, h: int) -> int:
        """Index of a shape in the canonical ordering of this set."""
        n = self.dim_max - self.dim_min + 1
        for name, v in (("l", l), ("w", w), ("h", h)):
            if not self.dim_min <= v <= self.dim_max:
                raise ValueError(f"{name}={v} outside [{self.dim_min}, {self.dim_max}]")
        return ((l - self.dim_min) * n + (w - self.dim_min)) * n + (h - self.dim_min)


@dataclass(frozen=True)
class ItemSequence:
    """One arrival sequence, with cut positions when it came from a tiling."""

    bin: BinConfig
    origin: Origin
    seed: int
    items: tuple[Item, ...]
    ground_truth: tuple[PackedItem, ...] | None = None

    def __post_init__(self) -> None:
        if self.ground_truth is not None and len(self.ground_truth) != len(self.items):
            raise ValueError("ground truth must align with the item list")

    @property
    def total_volume(self) -> int:
        return sum(item.volume for item in self.items)


def _check_thresholds(bin: BinConfig, dim_min: int, dim_max: int) -> None:
    if not 1 <= dim_min <= dim_max:
        raise DatagenError(f"need 1 <= dim_min <= dim_max, got {dim_min}..{dim_max}")
    if 2 * dim_max > min(bin.L, bin.W, bin.H):
        raise DatagenError(
            f"dim_max={dim_max} exceeds half the smallest bin edge of {bin}"
        )
    if dim_max + 1 < 2 * dim_min:
        raise DatagenError(
            f"an edge of {dim_max + 1} could not be split into parts >= {dim_min}"
        )


def rs_sequence(rng: np.random.Generator, bin: BinConfig, item_set: ItemSet) -> list[Item]:
    """Uniform draws from the item set until their volume reaches the bin volume.

    The stop rule is exact: the sequence is the shortest prefix whose
    cumulative volume is at least ``bin.volume``.
    """
    _check_thresholds(bin, item_set.dim_min, item_set.dim_max)
    items: list[Item] = []
    total = 0
    while total < bin.volume:
        item = item_set.items[int(rng.integers(0, len(item_set.items)))]
        items.append(item)
        total += item.volume
    return items


@dataclass
class CutStats:
    """Bookkeeping for one `cut_bin` call (restarts should be rare)."""

    restarts: int = 0
    splits: int = 0


def cut_bin(
    rng: np.random.Generator,
    bin: BinConfig,
    dim_min: int = 2,
    dim_max: int = 5,
    *,
    split_retries: int = 16,
    max_restarts: int = 200,
    stats: CutStats | None = None,
) -> list[PackedItem]:
    """Recursively cut the full bin into a perfect tiling of valid pieces.

    Pieces with any edge above ``dim_max`` are split along a uniformly
    chosen oversize axis at a uniformly chosen plane.  A plane that would
    strand a part below ``dim_min`` on the split axis is re-rolled (such a
    part could never become valid: later splits only shrink edges); after
    ``split_retries`` bad rolls the whole cut starts over.  Every returned
    piece has all edges in ``[dim_min, dim_max]`` and the pieces partition
    the bin exactly.
    """
    _check_thresholds(bin, dim_min, dim_max)
    if stats is None:
        stats = CutStats()
    canonical = ItemSet.canonical(dim_min, dim_max)

    for _ in range(max_restarts + 1):
        pieces: list[tuple[int, int, int, int, int, int]] = [(0, 0, 0, bin.L, bin.W, bin.H)]
        done: list[tuple[int, int, int, int, int, int]] = []
        failed = False
        while pieces and not failed:
            idx = int(rng.integers(0, len(pieces)))
            x, y, z, l, w, h = pieces.pop(idx)
            dims = (l, w, h)
            oversize = [a for a in range(3) if dims[a] > dim_max]
            if not oversize:
                done.append((x, y, z, l, w, h))
                continue
            axis = oversize[int(rng.integers(0, len(oversize)))]
            extent = dims[axis]
            cut = -1
            for _attempt in range(split_retries):
                stats.splits += 1
                candidate = int(rng.integers(1, extent))
                if candidate >= dim_min and extent - candidate >= dim_min:
                    cut = candidate
                    break
            if cut < 0:
                failed = True
                break
            first = list(dims)
            second = list(dims)
            first[axis] = cut
            second[axis] = extent - cut
            offset = [0, 0, 0]
            offset[axis] = cut
            pieces.append((x, y, z, first[0], first[1], first[2]))
            pieces.append((x + offset[0], y + offset[1], z + offset[2], *second))
        if not failed:
            out = [
                PackedItem(
                    item=Item(l, w, h, type_id=canonical.type_index(l, w, h)),
                    orientation=Orientation.IDENTITY,
                    x=x,
                    y=y,
                    z=z,
                )
                for (x, y, z, l, w, h) in done
            ]
            return out
        stats.restarts += 1
    raise DatagenError(f"cut did not converge after {max_restarts} restarts")


def cut1_order(rng: np.random.Generator, pieces: Sequence[PackedItem]) -> list[PackedItem]:
    """Order pieces by ascending bottom height, shuffling within each tie group."""
    by_z: dict[int, list[PackedItem]] = {}
    for piece in pieces:
        by_z.setdefault(piece.z, []).append(piece)
    out: list[PackedItem] = []
    for z in sorted(by_z):
        group = by_z[z]
        for idx in rng.permutation(len(group)):
            out.append(group[int(idx)])
    return out


def cut2_order(
    rng: np.random.Generator, pieces: Sequence[PackedItem], bin: BinConfig
) -> list[PackedItem]:
    """Order pieces bottom-up along the partially rebuilt surface.

    At each step one piece is drawn uniformly among those whose whole
    footprint rests exactly on the current working heights (all columns
    under it already rebuilt to its bottom), then its columns are raised.
    For a perfect tiling such a piece always exists.
    """
    working = np.zeros((bin.L, bin.W), dtype=np.int64)
    remaining = list(pieces)
    out: list[PackedItem] = []
    while remaining:
        eligible = [
            i
            for i, p in enumerate(remaining)
            if bool((working[p.x : p.x + p.item.l, p.y : p.y + p.item.w] == p.z).all())
        ]
        if not eligible:
            raise DatagenError("no piece rests on the working surface; tiling is corrupt")
        pick = eligible[int(rng.integers(0, len(eligible)))]
        piece = remaining.pop(pick)
        working[piece.x : piece.x + piece.item.l, piece.y : piece.y + piece.item.w] = piece.top
        out.append(piece)
    return out


def sequence_seed(master_seed: int, index: int) -> int:
    """Deterministic per-sequence seed derived from a dataset master seed."""
    seq = np.random.SeedSequence((master_seed, index))
    return int(seq.generate_state(1, np.uint64)[0])


def generate_sequence(
    origin: Origin | str,
    bin: BinConfig,
    seed: int,
    dim_min: int = 2,
    dim_max: int = 5,
    *,
    cut_stats: CutStats | None = None,
) -> ItemSequence:
    """Generate one arrival sequence from its own seed.

    This is the single entry point used by dataset files, the benchmark
    CLI and the game service, so the same ``(origin, bin, seed)`` triple
    always yields the same sequence everywhere.
    """
    origin = Origin(origin)
    rng = np.random.default_rng(seed)
    if origin is Origin.RS:
        items = rs_sequence(rng, bin, ItemSet.canonical(dim_min, dim_max))
        return ItemSequence(bin=bin, origin=origin, seed=seed, items=tuple(items))
    pieces = cut_bin(rng, bin, dim_min, dim_max, stats=cut_stats)
    ordered = cut1_order(rng, pieces) if origin is Origin.CUT1 else cut2_order(rng, pieces, bin)
    return ItemSequence(
        bin=bin,
        origin=origin,
        seed=seed,
        items=tuple(p.item for p in ordered),
        ground_truth=tuple(ordered),
    )


def make_dataset(
    origin: Origin | str,
    bin: BinConfig,
    count: int,
    master_seed: int,
    dim_min: int = 2,
    dim_max: int = 5,
    *,
    cut_stats: CutStats | None = None,
) -> list[ItemSequence]:
    """``count`` sequences with per-sequence seeds derived from ``master_seed``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [
        generate_sequence(
            origin, bin, sequence_seed(master_seed, i), dim_min, dim_max, cut_stats=cut_stats
        )
        for i in range(count)
    ]


# ---------------------------------------------------------------------------
# dataset files
#
# Plain UTF-8 text, space separated, newline terminated.  One block per
# sequence: a header line
#
#     bin L W H | ORIGIN | seed
#
# followed by one line per item, ``l w h`` for RS sequences and
# ``l w h x y z`` (dims plus ground-truth anchor) for CUT sequences.
# ---------------------------------------------------------------------------


def serialize_dataset(sequences: Iterable[ItemSequence]) -> str:
    lines: list[str] = []
    for seq in sequences:
        lines.append(f"bin {seq.bin.L} {seq.bin.W} {seq.bin.H} | {seq.origin} | {seq.seed}")
        if seq.ground_truth is None:
            lines.extend(f"{item.l} {item.w} {item.h}" for item in seq.items)
        else:
            lines.extend(
                f"{p.item.l} {p.item.w} {p.item.h} {p.x} {p.y} {p.z}"
                for p in seq.ground_truth
            )
    return "\n".join(lines) + "\n"


def parse_dataset(text: str) -> list[ItemSequence]:
    sequences: list[ItemSequence] = []
    bin: BinConfig | None = None
    origin: Origin | None = None
    seed = 0
    items: list[Item] = []
    truth: list[PackedItem] = []

    def flush() -> None:
        if bin is None or origin is None:
            return
        sequences.append(
            ItemSequence(
                bin=bin,
                origin=origin,
                seed=seed,
                items=tuple(items),
                ground_truth=tuple(truth) if origin is not Origin.RS else None,
            )
        )

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            raise ValueError(f"line {lineno}: blank lines are not allowed in datasets")
        if line.startswith("bin "):
            flush()
            parts = [p.strip() for p in line.split("|")]
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: malformed header {line!r}")
            dims = parts[0].split()
            if len(dims) != 4:
                raise ValueError(f"line {lineno}: malformed bin spec {parts[0]!r}")
            bin = BinConfig(int(dims[1]), int(dims[2]), int(dims[3]))
            origin = Origin(parts[1])
            seed = int(parts[2])
            items, truth = [], []
            continue
        if bin is None or origin is None:
            raise ValueError(f"line {lineno}: item line before any header")
        fields = line.split()
        if origin is Origin.RS:
            if len(fields) != 3:
                raise ValueError(f"line {lineno}: RS items need 3 fields, got {len(fields)}")
            items.append(Item(int(fields[0]), int(fields[1]), int(fields[2])))
        else:
            if len(fields) != 6:
                raise ValueError(f"line {lineno}: CUT items need 6 fields, got {len(fields)}")
            item = Item(int(fields[0]), int(fields[1]), int(fields[2]))
            items.append(item)
            truth.append(
                PackedItem(
                    item=item,
                    orientation=Orientation.IDENTITY,
                    x=int(fields[3]),
                    y=int(fields[4]),
                    z=int(fields[5]),
                )
            )
    flush()
    return sequences


def write_dataset(path: str | Path, sequences: Iterable[ItemSequence]) -> None:
    Path(path).write_bytes(serialize_dataset(sequences).encode("utf-8"))


def read_dataset(path: str | Path) -> list[ItemSequence]:
    return parse_dataset(Path(path).read_bytes().decode("utf-8"))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SequenceReport:
    """Findings from replaying / checking one sequence.

    For CUT sequences the ground truth is replayed through the real
    placement rules in arrival order; a valid tiling produces no
    findings and exactly full utilization.
    """

    origin: Origin
    n_items: int
    total_volume: int
    bin_volume: int
    utilization: Fraction
    feasibility_failures: int = 0
    anchor_mismatches: int = 0
    volume_reached: bool = True
    stop_minimal: bool = True

    @property
    def ok(self) -> bool:
        if self.origin is Origin.RS:
            return self.volume_reached and self.stop_minimal
        return (
            self.feasibility_failures == 0
            and self.anchor_mismatches == 0
            and self.utilization == 1
        )


def validate_sequence(seq: ItemSequence) -> SequenceReport:
    total = seq.total_volume
    if seq.origin is Origin.RS:
        last = seq.items[-1].volume if seq.items else 0
        return SequenceReport(
            origin=seq.origin,
            n_items=len(seq.items),
            total_volume=total,
            bin_volume=seq.bin.volume,
            utilization=Fraction(min(total, seq.bin.volume), seq.bin.volume),
            volume_reached=total >= seq.bin.volume,
            stop_minimal=total - last < seq.bin.volume,
        )
    if seq.ground_truth is None:
        raise ValueError("CUT sequence without ground truth cannot be validated")
    height_map = HeightMap.empty(seq.bin)
    failures = 0
    mismatches = 0
    placed_volume = 0
    for item, truth in zip(seq.items, seq.ground_truth):
        le, we = item.footprint(truth.orientation)
        feasible = is_feasible(height_map, item, truth.orientation, truth.x, truth.y)
        if not feasible:
            failures += 1
        rest = rest_height(height_map, le, we, truth.x, truth.y)
        if rest != truth.z:
            mismatches += 1
        if rest + item.h <= seq.bin.H:
            height_map = place(height_map, item, truth.orientation, truth.x, truth.y)
            placed_volume += item.volume
    return SequenceReport(
        origin=seq.origin,
        n_items=len(seq.items),
        total_volume=total,
        bin_volume=seq.bin.volume,
        utilization=Fraction(placed_volume, seq.bin.volume),
        feasibility_failures=failures,
        anchor_mismatches=mismatches,
    )
