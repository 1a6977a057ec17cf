"""Closure-gap estimation and next-move routing."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from intentc.config import DEFAULT_CONFIG, Config
from intentc.document import REQUIRED_FIELDS
from intentc.envelope import EnvelopeDecision, Verdict, membership
from intentc.model import DIMENSIONS, Action, ContractTuple, Dimension, TaskEpisode
from intentc.predicates import TruthValue

# Highest severity first: acting without authority is the costliest skip.
PRIORITY = (Dimension.INST, Dimension.PROC, Dimension.EVID, Dimension.SEM)


@dataclass(frozen=True)
class ClosureGaps:
    sem: float = 0.0
    evid: float = 0.0
    proc: float = 0.0
    inst: float = 0.0
    cost: Mapping[Dimension, float] | None = None

    def __post_init__(self) -> None:
        for dim in DIMENSIONS:
            if not 0.0 <= self[dim] <= 1.0:
                raise ValueError(f"gap {dim.value} must lie in [0, 1], got {self[dim]}")

    def __getitem__(self, dim: Dimension | str) -> float:
        return getattr(self, Dimension(dim).value)

    def as_dict(self) -> dict[str, float]:
        return {dim.value: self[dim] for dim in DIMENSIONS}


@dataclass(frozen=True)
class ProxySignals:
    clarification_count: int = 0
    citation_conflicts: int = 0
    retry_depth: int = 0
    permission_denied_count: int = 0

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative")

    def count_for(self, dim: Dimension) -> int:
        return {
            Dimension.SEM: self.clarification_count,
            Dimension.EVID: self.citation_conflicts,
            Dimension.PROC: self.retry_depth,
            Dimension.INST: self.permission_denied_count,
        }[dim]


class MoveKind(str, Enum):
    ACT = "act"
    SEARCH = "search"
    ASK = "ask"
    RETRIEVE = "retrieve"
    SIMULATE = "simulate"
    ESCALATE = "escalate"
    ABSTAIN = "abstain"


GAP_MOVES = {
    Dimension.INST: MoveKind.ESCALATE,
    Dimension.PROC: MoveKind.SIMULATE,
    Dimension.EVID: MoveKind.RETRIEVE,
    Dimension.SEM: MoveKind.ASK,
}


@dataclass(frozen=True)
class Move:
    kind: MoveKind
    reason: str = ""
    target_dimension: Dimension | None = None

    def __post_init__(self) -> None:
        if self.kind is MoveKind.ACT and self.target_dimension is not None:
            raise ValueError("act carries no target dimension")


def estimate_gaps(
    e: TaskEpisode,
    K: ContractTuple,
    sig: ProxySignals = ProxySignals(),
    candidate: Action | None = None,
    now: float = 0.0,
    config: Config = DEFAULT_CONFIG,
    with_cost: bool = False,
) -> ClosureGaps:
    """Proxy estimate of the per-dimension closure gap.

    The base term is the share of a dimension's required fields that are
    unresolved, counting both compile-time omissions and fields the candidate's
    evaluation could not resolve. Each proxy count n adds kappa * n / (n + 1)
    to its dimension.
    """
    open_fields = {dim: set(K.unresolved[dim]) for dim in DIMENSIONS}
    if candidate is not None:
        decision = membership(candidate, e, K, now, config)
        for dim in DIMENSIONS:
            open_fields[dim].update(decision.per_dim[dim].unresolved_fields)
    gaps = {}
    for dim in DIMENSIONS:
        base = min(1.0, len(open_fields[dim]) / len(REQUIRED_FIELDS[dim]))
        n = sig.count_for(dim)
        gaps[dim] = min(1.0, max(0.0, base + config.kappa * n / (n + 1)))
    cost = {dim: gaps[dim] * config.unit_cost[dim] for dim in DIMENSIONS} if with_cost else None
    return ClosureGaps(*(gaps[dim] for dim in DIMENSIONS), cost=cost)


def route(
    gaps: ClosureGaps,
    decision: EnvelopeDecision,
    checker_pass: bool | None = None,
    thresholds: Mapping[Dimension, float] | None = None,
    contracts: ContractTuple | None = None,
) -> Move:
    """Pick the next move.

    Gaps above threshold win in the order inst, proc, evid, sem; otherwise the
    envelope verdict decides. Escalation becomes abstention when ``contracts``
    shows no escalation path (neither escalate_if nor role_permissions known).
    """
    thresholds = thresholds or DEFAULT_CONFIG.thresholds
    no_path = contracts is not None and not contracts.institutional.has_escalation_path

    def escalate(reason: str, dim: Dimension | None) -> Move:
        if no_path:
            return Move(MoveKind.ABSTAIN, f"{reason}; no escalation path declared", dim)
        return Move(MoveKind.ESCALATE, reason, dim)

    for dim in PRIORITY:
        if gaps[dim] > thresholds[dim]:
            reason = f"{dim.long_name} gap {gaps[dim]:.3g} exceeds {thresholds[dim]:.3g}"
            if GAP_MOVES[dim] is MoveKind.ESCALATE:
                return escalate(reason, dim)
            return Move(GAP_MOVES[dim], reason, dim)
    if decision.verdict is Verdict.OUTSIDE:
        failing = [d for d in PRIORITY if decision.per_dim[d].value is TruthValue.FALSE]
        return escalate(decision.summary(), failing[0] if failing else None)
    if decision.verdict is Verdict.BOUNDARY:
        open_dims = [d for d in PRIORITY if decision.per_dim[d].value is TruthValue.UNKNOWN]
        return Move(MoveKind.ASK, decision.summary(), open_dims[0] if open_dims else None)
    if checker_pass is False:
        return Move(MoveKind.SEARCH, "clear contract but weak candidate", None)
    return Move(MoveKind.ACT, "inside the delegation envelope")
