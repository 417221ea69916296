"""Solvers and the single-bin episode runner.

A solver turns an `EpisodeState` into the next `Action`; the runner
loops solver and `step` until the episode reports done, timing each
decision (and only the decision).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Protocol

from binpack3d.core import (
    Action,
    EpisodeState,
    NoFeasibleAction,
    compute_mask,
    step,
)
from binpack3d.lookahead import (
    SearchBudget,
    brute_force_search,
    mcts_search,
)
from binpack3d.policies import Policy, ValueEstimator


class Solver(Protocol):
    """Anything that can pick the next action for a live episode."""

    name: str

    def decide(self, state: EpisodeState) -> Action: ...


@dataclass
class PolicySolver:
    """No lookahead: ask the policy directly, one item at a time."""

    policy: Policy
    name: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            self.name = self.policy.name

    def decide(self, state: EpisodeState) -> Action:
        mask = compute_mask(state.height_map, state.current_item, state.orientations)
        return self.policy(state, mask).action


@dataclass
class MCTSSolver:
    """Permutation tree search over the visible buffer, every decision.

    The budget's seed is reused for each decision, so a whole episode is
    reproducible from its configuration.
    """

    policy: Policy
    value: ValueEstimator
    budget: SearchBudget = field(default_factory=SearchBudget)
    name: str = "mcts"

    def decide(self, state: EpisodeState) -> Action:
        return mcts_search(state, state.buffer, self.policy, self.value, self.budget)


@dataclass
class BruteForceSolver:
    """Exhaustive permutation search; falls back to the plain policy when
    no ordering completes (the front item itself is still placeable)."""

    policy: Policy
    value: ValueEstimator
    max_items: int = 8
    name: str = "brute-force"

    def decide(self, state: EpisodeState) -> Action:
        try:
            return brute_force_search(
                state, state.buffer, self.policy, self.value, max_items=self.max_items
            )
        except NoFeasibleAction:
            mask = compute_mask(state.height_map, state.current_item, state.orientations)
            if not mask.any():
                raise
            return self.policy(state, mask).action


@dataclass(frozen=True)
class EpisodeResult:
    """Everything a finished episode produced, replayable from `actions`."""

    final: EpisodeState
    actions: tuple[Action, ...]
    rewards: tuple[Fraction, ...]
    decision_seconds: tuple[float, ...]

    @property
    def items_placed(self) -> int:
        return len(self.final.packed)

    @property
    def utilization(self) -> Fraction:
        return self.final.utilization

    @property
    def total_reward(self) -> Fraction:
        return sum(self.rewards, Fraction(0))

    @property
    def mean_decision_seconds(self) -> float:
        if not self.decision_seconds:
            return 0.0
        return sum(self.decision_seconds) / len(self.decision_seconds)


def run_episode(state: EpisodeState, solver: Solver) -> EpisodeResult:
    """Drive one episode to completion with the given solver."""
    actions: list[Action] = []
    rewards: list[Fraction] = []
    seconds: list[float] = []
    while not state.done:
        start = time.perf_counter()
        action = solver.decide(state)
        seconds.append(time.perf_counter() - start)
        state, gained = step(state, action)
        actions.append(action)
        rewards.append(gained)
    return EpisodeResult(
        final=state,
        actions=tuple(actions),
        rewards=tuple(rewards),
        decision_seconds=tuple(seconds),
    )
