"""Domain types shared across the compiler, evaluator, router and bench harness.

Every type is a frozen dataclass. Sequences are stored as tuples; mappings are
plain dicts and must be treated as read-only once an object is built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Mapping, Union

if TYPE_CHECKING:
    from intentc.conditions import Expr

Scalar = Union[bool, int, float, str]


class Dimension(str, Enum):
    SEM = "sem"
    EVID = "evid"
    PROC = "proc"
    INST = "inst"

    @property
    def long_name(self) -> str:
        return _LONG_NAMES[self]


_LONG_NAMES = {
    Dimension.SEM: "semantic",
    Dimension.EVID: "evidentiary",
    Dimension.PROC: "procedural",
    Dimension.INST: "institutional",
}

DIMENSIONS: tuple[Dimension, ...] = tuple(Dimension)


class RiskLevel(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"

    @property
    def rank(self) -> int:
        return _RISK_ORDER.index(self)


_RISK_ORDER = [RiskLevel.LOW, RiskLevel.MEDIUM, RiskLevel.HIGH, RiskLevel.CRITICAL]
RISK_LEVELS: tuple[RiskLevel, ...] = tuple(_RISK_ORDER)


class EventType(str, Enum):
    COMPILE = "compile"
    SEARCH = "search"
    ESCALATE = "escalate"
    EXECUTE = "execute"
    WAIT = "wait"


class ReviewOutcome(str, Enum):
    CHANGED = "changed"
    BOUNDARY_CONFIRMED = "boundary_confirmed"
    NO_CHANGE = "no_change"


@dataclass(frozen=True)
class Action:
    op: str
    obj: str = ""
    content: str = ""
    actor: str = ""
    tool: str = ""
    t: float = 0.0
    bindings: Mapping[str, Scalar] = field(default_factory=dict)
    citations: tuple[str, ...] = ()
    reversible: bool = False
    rollback_op: str | None = None
    # Stable handle for files and CLI lookups; not part of the signature.
    id: str = ""

    @property
    def signature(self) -> tuple[str, str, str, str]:
        return (self.op, self.obj, self.actor, self.tool)

    @property
    def key(self) -> str:
        return self.id or ":".join(self.signature)


@dataclass(frozen=True)
class EvidenceRecord:
    id: str
    source_class: str
    timestamp: float
    provenance: str | None = None
    admissible_flag: bool | None = None
    payload: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class Event:
    q: EventType
    s: float
    f: float
    c: float | None = None
    action: Action | None = None
    ratified: bool | None = None
    review_outcome: ReviewOutcome | None = None
    human_review: bool = False

    @property
    def cost(self) -> float:
        """Accounting cost, falling back to the event's wall-clock duration."""
        return self.f - self.s if self.c is None else self.c

    @property
    def duration(self) -> float:
        return self.f - self.s


@dataclass(frozen=True)
class EventTrace:
    episode_id: str
    events: tuple[Event, ...] = ()

    def __add__(self, other: EventTrace) -> EventTrace:
        return EventTrace(self.episode_id, self.events + other.events)

    def executed(self) -> list[Action]:
        return [ev.action for ev in self.events if ev.q is EventType.EXECUTE and ev.action is not None]


@dataclass(frozen=True)
class TaskEpisode:
    id: str
    request: str = ""
    context: Mapping[str, Scalar] = field(default_factory=dict)
    action_space: tuple[Action, ...] = ()
    evidence: tuple[EvidenceRecord, ...] = ()
    policy: str = ""
    history: EventTrace | None = None
    requires_escalation: bool | None = None

    @property
    def trace(self) -> EventTrace:
        return self.history if self.history is not None else EventTrace(self.id)

    def evidence_by_id(self) -> dict[str, EvidenceRecord]:
        return {rec.id: rec for rec in self.evidence}

    def find_action(self, key: str) -> Action:
        for action in self.action_space:
            if action.key == key:
                return action
        raise KeyError(key)


# Contracts ------------------------------------------------------------------


@dataclass(frozen=True)
class SourceRule:
    source_class: str
    max_age_seconds: float | None = None
    provenance_required: bool = False
    # "current_version" sources: currency is asserted by the record's admissible_flag.
    version_match: bool = False
    required: bool = True


@dataclass(frozen=True)
class SemanticContract:
    entities: tuple[str, ...] | None = None
    acceptance_criteria: tuple[Expr, ...] | None = None
    ambiguity_policy: Mapping[str, str] | None = None
    criteria_open: bool = False


@dataclass(frozen=True)
class EvidentiaryContract:
    admissible_sources: tuple[SourceRule, ...] | None = None
    conflict_resolution: tuple[str, ...] | None = None
    freshness_clock: str = "episode"

    def rule_for(self, source_class: str) -> SourceRule | None:
        for rule in self.admissible_sources or ():
            if rule.source_class == source_class:
                return rule
        return None


@dataclass(frozen=True)
class ProceduralContract:
    workflow: tuple[str, ...] | None = None
    allowed_tools: frozenset[str] | None = None
    step_of_op: Mapping[str, str] = field(default_factory=dict)
    rollback: str | None = None
    rollback_required_ops: frozenset[str] = frozenset()
    stop_conditions: tuple[Expr, ...] = ()
    retry_limit: int = 3


@dataclass(frozen=True)
class InstitutionalContract:
    autonomous_if: Expr | None = None
    escalate_if: Expr | None = None
    role_permissions: Mapping[str, frozenset[str]] | None = None
    risk_of_op: Mapping[str, RiskLevel] | None = None
    alpha_map: Mapping[RiskLevel, float] = field(default_factory=dict)
    audit_retention_days: int | None = None
    separation_pairs: tuple[tuple[str, str], ...] = ()
    ordering_rules: tuple[tuple[str, str], ...] = ()
    cumulative_risk_cap: float | None = None
    approved_composites: frozenset[str] = frozenset()

    @property
    def has_escalation_path(self) -> bool:
        return self.escalate_if is not None or self.role_permissions is not None


@dataclass(frozen=True)
class ContractTuple:
    semantic: SemanticContract
    evidentiary: EvidentiaryContract
    procedural: ProceduralContract
    institutional: InstitutionalContract
    unresolved: Mapping[Dimension, tuple[str, ...]] = field(
        default_factory=lambda: {dim: () for dim in DIMENSIONS}
    )
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if set(self.unresolved) != set(DIMENSIONS):
            raise ValueError("unresolved must have exactly the keys sem, evid, proc, inst")

    def contract(self, dim: Dimension):
        return {
            Dimension.SEM: self.semantic,
            Dimension.EVID: self.evidentiary,
            Dimension.PROC: self.procedural,
            Dimension.INST: self.institutional,
        }[dim]


# Validation -----------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    invariant: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


def _is_scalar(value: object) -> bool:
    if isinstance(value, bool) or isinstance(value, str):
        return True
    if isinstance(value, (int, float)):
        return math.isfinite(value)
    return False


def _validate_action(action: Action, where: str) -> list[Diagnostic]:
    out = []
    for name in ("op", "actor", "tool"):
        if not getattr(action, name):
            out.append(Diagnostic("action-required-field", f"{where}.{name}", f"action {action.key}: empty {name}"))
    if action.reversible and not action.rollback_op:
        out.append(
            Diagnostic(
                "reversible-needs-rollback",
                f"{where}.rollback_op",
                f"action {action.key}: reversible without rollback_op",
            )
        )
    for key, value in action.bindings.items():
        if not _is_scalar(value):
            out.append(Diagnostic("scalar-bindings", f"{where}.bindings.{key}", f"non-scalar binding {key!r}"))
    return out


def validate_trace(trace: EventTrace, where: str = "history") -> list[Diagnostic]:
    out = []
    prev_s = -math.inf
    for i, ev in enumerate(trace.events):
        loc = f"{where}.events[{i}]"
        if ev.f < ev.s:
            out.append(Diagnostic("event-finish-after-start", loc, f"finish {ev.f} before start {ev.s}"))
        if ev.s < prev_s:
            out.append(Diagnostic("events-sorted", loc, "events not sorted by start time"))
        prev_s = ev.s
        if ev.review_outcome is not None and ev.q not in (EventType.ESCALATE, EventType.WAIT):
            out.append(
                Diagnostic("review-outcome-placement", loc, f"review_outcome on {ev.q.value} event")
            )
        if ev.action is not None:
            out.extend(_validate_action(ev.action, f"{loc}.action"))
    return out


def validate_episode(e: TaskEpisode) -> list[Diagnostic]:
    """Check the structural invariants of an episode; returns [] when it is well formed."""
    out: list[Diagnostic] = []
    if not e.id:
        out.append(Diagnostic("episode-id", "id", "empty episode id"))
    if not e.action_space:
        out.append(Diagnostic("finite-action-space", "action_space", "empty action space"))
    seen: dict[tuple[str, str, str, str], str] = {}
    for i, action in enumerate(e.action_space):
        where = f"action_space[{i}]"
        out.extend(_validate_action(action, where))
        sig = action.signature
        if sig in seen:
            out.append(
                Diagnostic(
                    "distinct-signatures",
                    where,
                    f"action {action.key} repeats signature of {seen[sig]}",
                )
            )
        else:
            seen[sig] = action.key
    ids: set[str] = set()
    for i, rec in enumerate(e.evidence):
        where = f"evidence[{i}]"
        if rec.id in ids:
            out.append(Diagnostic("evidence-id-unique", f"{where}.id", f"duplicate evidence id {rec.id}"))
        ids.add(rec.id)
        if not math.isfinite(rec.timestamp):
            out.append(Diagnostic("evidence-timestamp-finite", f"{where}.timestamp", "non-finite timestamp"))
    for key, value in e.context.items():
        if not _is_scalar(value):
            out.append(Diagnostic("scalar-bindings", f"context.{key}", f"non-scalar context value {key!r}"))
    if e.history is not None:
        out.extend(validate_trace(e.history))
    return out


RESERVED_KEYS = ("op", "obj", "actor", "tool")


def action_bindings(a: Action, e: TaskEpisode) -> dict[str, Scalar]:
    """Flatten context and action attributes into one binding map.

    Action bindings shadow context values of the same name; the reserved keys
    op, obj, actor and tool always reflect the action itself.
    """
    out: dict[str, Scalar] = dict(e.context)
    out.update(a.bindings)
    out.update(op=a.op, obj=a.obj, actor=a.actor, tool=a.tool)
    return out
