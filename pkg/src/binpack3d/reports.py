"""Reproducible benchmark runs: configs, reports and comparison tables.

A `RunConfig` pins everything a run depends on — bin, dataset spec and
solver spec — so executing it twice produces byte-identical artifacts.
Report files are plain structured text (one record per episode plus a
summary block) and deliberately exclude wall-clock timings; those are
measurement data, not results, and go to an optional sidecar file so the
report itself stays hash-stable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from binpack3d import __version__
from binpack3d.core import (
    BOTH_ORIENTATIONS,
    DEFAULT_ORIENTATIONS,
    BinConfig,
    RewardMode,
    new_episode,
)
from binpack3d.datagen import (
    ItemSet,
    ItemSequence,
    Origin,
    sequence_seed,
    serialize_dataset,
)
from binpack3d.episodes import MCTSSolver, PolicySolver, Solver, run_episode
from binpack3d.lookahead import SearchBudget
from binpack3d.multibin import run_multibin_episode
from binpack3d.policies import (
    VALUE_ESTIMATORS,
    BoundaryRulePolicy,
    DblPolicy,
    RandomFeasiblePolicy,
)

REPORT_HEADER = "# binpack3d run report v1"
TIMES_HEADER = "# binpack3d decision times v1 (wall clock; not reproducible)"

POLICY_NAMES = ("boundary", "dbl", "random")


class ReportError(Exception):
    """Config/dataset mismatch or malformed report file."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a benchmark run depends on, JSON-serializable.

    ``seed`` is the dataset master seed; per-sequence seeds derive from
    it, the random policy and the search reuse it, so one integer pins
    the whole run.
    """

    bin: BinConfig
    origin: Origin
    count: int
    seed: int
    dim_min: int = 2
    dim_max: int = 5
    policy: str = "boundary"
    aggregate: str = "mean"  # boundary rule option
    volume_scale: str = "1"  # boundary rule option, a Fraction literal
    k: int = 1  # visible buffer; 1 = plain policy call
    simulations: int = 600
    exploration: float = 1.0
    search_seed: int = 0
    estimator: str = "free-volume"
    swap_lw: bool = False
    reward_mode: RewardMode = RewardMode.STEPWISE
    bins: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", Origin(self.origin))
        object.__setattr__(self, "reward_mode", RewardMode(self.reward_mode))
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.bins < 1:
            raise ValueError(f"bins must be >= 1, got {self.bins}")
        if self.bins > 1 and self.k > 1:
            raise ValueError("lookahead search across multiple bins is not supported")
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.estimator not in VALUE_ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if Fraction(self.volume_scale) <= 0:
            raise ValueError(f"volume_scale must be positive, got {self.volume_scale!r}")

    @property
    def orientations(self):
        return BOTH_ORIENTATIONS if self.swap_lw else DEFAULT_ORIENTATIONS

    def to_json(self) -> dict:
        return {
            "bin": [self.bin.L, self.bin.W, self.bin.H],
            "origin": self.origin.value,
            "count": self.count,
            "seed": self.seed,
            "dim_min": self.dim_min,
            "dim_max": self.dim_max,
            "policy": self.policy,
            "aggregate": self.aggregate,
            "volume_scale": self.volume_scale,
            "k": self.k,
            "simulations": self.simulations,
            "exploration": self.exploration,
            "search_seed": self.search_seed,
            "estimator": self.estimator,
            "swap_lw": self.swap_lw,
            "reward_mode": self.reward_mode.value,
            "bins": self.bins,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_json(cls, payload: dict) -> "RunConfig":
        data = dict(payload)
        L, W, H = data.pop("bin")
        return cls(bin=BinConfig(L, W, H), **data)

    def solver_label(self) -> str:
        """Short human column key: policy plus whatever deviates from plain."""
        parts = [self.policy]
        if self.policy == "boundary" and (
            self.aggregate != "mean" or Fraction(self.volume_scale) != 1
        ):
            parts.append(f"{self.aggregate}/{self.volume_scale}")
        if self.k > 1:
            parts.append(f"k={self.k} T={self.simulations} {self.estimator}")
        if self.swap_lw:
            parts.append("+swap")
        if self.bins > 1:
            parts.append(f"bins={self.bins} {self.estimator}")
        return " ".join(parts)


def make_policy(config: RunConfig):
    item_set = ItemSet.canonical(config.dim_min, config.dim_max)
    if config.policy == "boundary":
        return BoundaryRulePolicy(
            item_set,
            aggregate=config.aggregate,
            volume_scale=Fraction(config.volume_scale),
        )
    if config.policy == "dbl":
        return DblPolicy()
    return RandomFeasiblePolicy(np.random.default_rng(config.seed))


def make_solver(config: RunConfig) -> Solver:
    policy = make_policy(config)
    if config.k == 1:
        return PolicySolver(policy)
    budget = SearchBudget(
        simulations=config.simulations,
        exploration=config.exploration,
        seed=config.search_seed,
    )
    return MCTSSolver(policy, VALUE_ESTIMATORS[config.estimator](), budget)


@dataclass(frozen=True)
class EpisodeRecord:
    index: int
    seed: int
    items: int
    utilization: Fraction
    decision_seconds: tuple[float, ...] = ()


@dataclass(frozen=True)
class RunReport:
    config: RunConfig
    engine: str
    dataset_sha256: str
    episodes: tuple[EpisodeRecord, ...]

    @property
    def mean_items(self) -> Fraction:
        return Fraction(sum(e.items for e in self.episodes), len(self.episodes))

    @property
    def mean_utilization(self) -> Fraction:
        return sum((e.utilization for e in self.episodes), Fraction(0)) / len(
            self.episodes
        )

    @property
    def mean_decision_seconds(self) -> float:
        times = [t for e in self.episodes for t in e.decision_seconds]
        return sum(times) / len(times) if times else 0.0


def dataset_sha256(sequences: Sequence[ItemSequence]) -> str:
    return hashlib.sha256(serialize_dataset(sequences).encode()).hexdigest()


def check_dataset(config: RunConfig, sequences: Sequence[ItemSequence]) -> None:
    """Fail fast when a dataset was not produced by this config's spec."""
    if len(sequences) != config.count:
        raise ReportError(
            f"config expects {config.count} sequences, dataset has {len(sequences)}"
        )
    for i, seq in enumerate(sequences):
        if seq.bin != config.bin:
            raise ReportError(f"sequence {i}: dataset bin {seq.bin} != config bin {config.bin}")
        if seq.origin is not config.origin:
            raise ReportError(
                f"sequence {i}: dataset origin {seq.origin} != config origin {config.origin}"
            )
        if seq.seed != sequence_seed(config.seed, i):
            raise ReportError(
                f"sequence {i}: seed {seq.seed} does not derive from master seed {config.seed}"
            )


def run_config(
    config: RunConfig,
    sequences: Sequence[ItemSequence],
    progress: Callable[[int], None] | None = None,
) -> RunReport:
    """Execute the configured solver over every sequence."""
    check_dataset(config, sequences)
    digest = dataset_sha256(sequences)
    records = []
    if config.bins == 1:
        solver = make_solver(config)
        for i, seq in enumerate(sequences):
            state = new_episode(
                config.bin,
                seq.items,
                k=config.k,
                orientations=config.orientations,
                reward_mode=config.reward_mode,
            )
            result = run_episode(state, solver)
            records.append(
                EpisodeRecord(
                    index=i,
                    seed=seq.seed,
                    items=result.items_placed,
                    utilization=result.utilization,
                    decision_seconds=result.decision_seconds,
                )
            )
            if progress is not None:
                progress(i)
    else:
        policy = make_policy(config)
        value = VALUE_ESTIMATORS[config.estimator]()
        for i, seq in enumerate(sequences):
            result = run_multibin_episode(
                config.bin,
                config.bins,
                seq.items,
                policy,
                value,
                orientations=config.orientations,
            )
            records.append(
                EpisodeRecord(
                    index=i,
                    seed=seq.seed,
                    items=result.placed_items,
                    utilization=result.mean_utilization,
                    decision_seconds=tuple(result.decision_seconds),
                )
            )
            if progress is not None:
                progress(i)
    return RunReport(
        config=config,
        engine=__version__,
        dataset_sha256=digest,
        episodes=tuple(records),
    )


# ---------------------------------------------------------------------------
# report files
#
# Stable text, one episode per line.  Timings are intentionally absent;
# `serialize_times` writes them separately.
# ---------------------------------------------------------------------------


def serialize_report(report: RunReport) -> str:
    lines = [
        REPORT_HEADER,
        f"engine {report.engine}",
        f"config {report.config.canonical_json()}",
        f"dataset sha256 {report.dataset_sha256}",
    ]
    for e in report.episodes:
        lines.append(f"episode {e.index} seed {e.seed} items {e.items} utilization {e.utilization}")
    lines.append(
        f"summary episodes {len(report.episodes)}"
        f" mean_items {report.mean_items}"
        f" mean_utilization {report.mean_utilization}"
    )
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> RunReport:
    lines = text.splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ReportError("not a report file (missing header)")
    try:
        engine = lines[1].split(" ", 1)[1]
        config = RunConfig.from_json(json.loads(lines[2].split(" ", 1)[1]))
        digest = lines[3].split()[2]
        episodes = []
        for line in lines[4:]:
            parts = line.split()
            if parts[0] == "summary":
                break
            episodes.append(
                EpisodeRecord(
                    index=int(parts[1]),
                    seed=int(parts[3]),
                    items=int(parts[5]),
                    utilization=Fraction(parts[7]),
                )
            )
        else:
            raise ReportError("missing summary line")
    except (IndexError, ValueError, json.JSONDecodeError) as exc:
        raise ReportError(f"malformed report file: {exc}") from exc
    report = RunReport(
        config=config, engine=engine, dataset_sha256=digest, episodes=tuple(episodes)
    )
    if parts[2] != str(len(episodes)) or parts[4] != str(report.mean_items):
        raise ReportError("summary line does not match episode records")
    return report


def serialize_times(report: RunReport) -> str:
    lines = [TIMES_HEADER]
    for e in report.episodes:
        joined = " ".join(repr(t) for t in e.decision_seconds)
        lines.append(f"episode {e.index} seconds {joined}".rstrip())
    return "\n".join(lines) + "\n"


def write_report(
    path: str | Path, report: RunReport, times_path: str | Path | None = None
) -> None:
    Path(path).write_text(serialize_report(report))
    if times_path is not None:
        Path(times_path).write_text(serialize_times(report))


def read_report(path: str | Path) -> RunReport:
    return parse_report(Path(path).read_text())


# ---------------------------------------------------------------------------
# comparison tables
# ---------------------------------------------------------------------------


def compare_reports(reports: Sequence[RunReport]) -> str:
    """Side-by-side  "# items / % space uti."  table, one row per solver."""
    if not reports:
        raise ReportError("nothing to compare")
    first = reports[0]
    for other in reports[1:]:
        if other.config.bin != first.config.bin:
            raise ReportError(f"bin dims differ: {other.config.bin} vs {first.config.bin}")
        same_dataset = (
            other.config.origin is first.config.origin
            and other.config.count == first.config.count
            and other.config.seed == first.config.seed
            and other.dataset_sha256 == first.dataset_sha256
        )
        if not same_dataset:
            raise ReportError("reports were produced from different datasets")
    bin = first.config.bin
    head = (
        f"dataset {first.config.origin} n={first.config.count}"
        f" seed={first.config.seed} bin={bin.L}x{bin.W}x{bin.H}"
    )
    width = max(len("solver"), max(len(r.config.solver_label()) for r in reports))
    rows = [head, f"{'solver':<{width}}  {'items':>7}  {'uti':>7}"]
    for r in reports:
        rows.append(
            f"{r.config.solver_label():<{width}}"
            f"  {float(r.mean_items):>7.2f}"
            f"  {100 * float(r.mean_utilization):>6.2f}%"
        )
    return "\n".join(rows) + "\n"
