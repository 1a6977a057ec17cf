"""Delegation-envelope membership and set-level measures over a finite action space.

For set computations (size, stability, tightening) an action counts as a
member only when all four predicates are True; Unknown is non-membership.
For routing, Unknown maps to the ``boundary`` verdict instead.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Sequence

from intentc.conditions import And, Expr, Ident, Num, Or, transform, walk
from intentc.config import DEFAULT_CONFIG, Config
from intentc.model import (
    DIMENSIONS,
    Action,
    ContractTuple,
    Dimension,
    Event,
    EventTrace,
    EventType,
    RiskLevel,
    TaskEpisode,
    action_bindings,
)
from intentc.predicates import (
    EvaluationError,
    PredicateResult,
    TruthValue,
    all_true,
    eval_dimension_with,
)


class Verdict(str, Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


class Band(str, Enum):
    AUTHORIZE = "authorize"
    ASK = "ask"
    DENY = "deny"


@dataclass(frozen=True)
class EnvelopeDecision:
    verdict: Verdict
    per_dim: dict[Dimension, PredicateResult]
    joint_probability: float
    reasons: tuple[str, ...] = ()

    def dims_with(self, value: TruthValue) -> list[Dimension]:
        return [dim for dim in DIMENSIONS if self.per_dim[dim].value is value]

    def summary(self) -> str:
        """``inside``, or the verdict followed by the dimensions responsible."""
        if self.verdict is Verdict.INSIDE:
            return "inside"
        value = TruthValue.FALSE if self.verdict is Verdict.OUTSIDE else TruthValue.UNKNOWN
        names = ", ".join(dim.long_name for dim in self.dims_with(value))
        return f"{self.verdict.value}: {names}"


def membership(
    a: Action, e: TaskEpisode, K: ContractTuple, now: float, config: Config = DEFAULT_CONFIG
) -> EnvelopeDecision:
    """Evaluate all four predicates and classify the action against the envelope."""
    bindings = action_bindings(a, e)
    per_dim: dict[Dimension, PredicateResult] = {}
    reasons: list[str] = []
    for dim in DIMENSIONS:
        try:
            result = eval_dimension_with(dim, a, e, K, now, bindings, config)
        except EvaluationError as exc:
            result = PredicateResult(dim, TruthValue.FALSE, (), 0.0, (f"contract evaluation error: {exc}",))
            reasons.append("contract evaluation error")
        per_dim[dim] = result
    values = [r.value for r in per_dim.values()]
    if TruthValue.FALSE in values:
        verdict = Verdict.OUTSIDE
    elif TruthValue.UNKNOWN in values:
        verdict = Verdict.BOUNDARY
    else:
        verdict = Verdict.INSIDE
    joint = 1.0
    for r in per_dim.values():
        joint *= r.probability
    for dim, r in per_dim.items():
        if r.value is not TruthValue.TRUE:
            reasons.extend(f"{dim.long_name}: {why}" for why in r.reasons)
    return EnvelopeDecision(verdict, per_dim, joint, tuple(dict.fromkeys(reasons)))


def is_inside(a: Action, e: TaskEpisode, K: ContractTuple, now: float, config: Config = DEFAULT_CONFIG) -> bool:
    """Fast membership test; stops at the first predicate that is not True."""
    try:
        return all_true(a, e, K, now, action_bindings(a, e))
    except EvaluationError:
        return False


# Probabilistic envelope -------------------------------------------------------


@dataclass(frozen=True)
class ProbabilisticDecision:
    authorized: bool
    band: Band
    p: float
    alpha: float
    risk: RiskLevel


def authorization_band(p: float, alpha: float, beta: float) -> Band:
    if p >= alpha:
        return Band.AUTHORIZE
    if alpha - beta <= p:
        return Band.ASK
    return Band.DENY


def risk_level(op: str, K: ContractTuple, config: Config = DEFAULT_CONFIG) -> RiskLevel:
    return (K.institutional.risk_of_op or {}).get(op, config.default_risk)


def alpha_for(level: RiskLevel, K: ContractTuple, config: Config = DEFAULT_CONFIG) -> float:
    return K.institutional.alpha_map.get(level, config.alpha_map[level])


def prob_membership(
    a: Action, e: TaskEpisode, K: ContractTuple, now: float, config: Config = DEFAULT_CONFIG
) -> ProbabilisticDecision:
    """Compare the joint predicate probability with the action's risk threshold."""
    p = membership(a, e, K, now, config).joint_probability
    level = risk_level(a.op, K, config)
    alpha = alpha_for(level, K, config)
    band = authorization_band(p, alpha, config.beta)
    return ProbabilisticDecision(band is Band.AUTHORIZE, band, p, alpha, level)


# Composite sequences ----------------------------------------------------------


@dataclass(frozen=True)
class SequenceVerdict:
    allowed: bool
    component_failures: tuple[tuple[int, EnvelopeDecision], ...] = ()
    global_violations: tuple[str, ...] = ()
    details: tuple[str, ...] = ()


def _with_history(e: TaskEpisode, actions: Sequence[Action], now: float) -> TaskEpisode:
    events = tuple(Event(EventType.EXECUTE, now, now, 0.0, action=a) for a in actions)
    return replace(e, history=e.trace + EventTrace(e.id, events))


def sequence_membership(
    seq: Sequence[Action],
    e: TaskEpisode,
    K: ContractTuple,
    now: float,
    composite_id: str | None = None,
    config: Config = DEFAULT_CONFIG,
) -> SequenceVerdict:
    """Authorize a composite action: every component inside plus the global constraints.

    Components are evaluated in order, each seeing the earlier ones as executed.
    When ``composite_id`` names an approved composite workflow, component
    institutional checks are waived; the other three predicates still apply.
    """
    if not seq:
        raise ValueError("sequence must be nonempty")
    inst = K.institutional
    inherited = composite_id is not None and composite_id in inst.approved_composites
    failures = []
    for i, a in enumerate(seq):
        decision = membership(a, _with_history(e, seq[:i], now), K, now, config)
        dims = [d for d in DIMENSIONS if not (inherited and d is Dimension.INST)]
        if any(decision.per_dim[d].value is not TruthValue.TRUE for d in dims):
            failures.append((i, decision))

    violations: list[str] = []
    details: list[str] = []
    prior_ops = [a.op for a in e.trace.executed()]
    for first, then in inst.ordering_rules:
        for j, a in enumerate(seq):
            if a.op == then and first not in prior_ops + [x.op for x in seq[:j]]:
                violations.append("ordering")
                details.append(f"{then} at position {j} not preceded by {first}")
                break
    for x, y in inst.separation_pairs:
        actors_x = {a.actor for a in seq if a.op == x}
        actors_y = {a.actor for a in seq if a.op == y}
        for actor in sorted(actors_x & actors_y):
            violations.append("separation_of_duties")
            details.append(f"{actor} performs both {x} and {y}")
    if inst.cumulative_risk_cap is not None:
        total = sum(config.risk_scores[risk_level(a.op, K, config)] for a in seq)
        if total > inst.cumulative_risk_cap:
            violations.append("cumulative_risk")
            details.append(f"cumulative risk {total:g} exceeds cap {inst.cumulative_risk_cap:g}")
    for j, a in enumerate(seq):
        if a.op in K.procedural.rollback_required_ops and not a.rollback_op:
            violations.append("rollback_dependency")
            details.append(f"{a.op} at position {j} has no rollback operation")
    violations = list(dict.fromkeys(violations))
    return SequenceVerdict(not failures and not violations, tuple(failures), tuple(violations), tuple(details))


# Set-level measures -----------------------------------------------------------


def inside_set(K: ContractTuple, e: TaskEpisode, now: float, config: Config = DEFAULT_CONFIG) -> frozenset[int]:
    """Indices of ``e.action_space`` that lie inside the deterministic envelope."""
    return frozenset(i for i, a in enumerate(e.action_space) if is_inside(a, e, K, now, config))


def envelope_size(K: ContractTuple, e: TaskEpisode, now: float, config: Config = DEFAULT_CONFIG) -> float:
    if not e.action_space:
        raise ValueError("empty action space")
    return len(inside_set(K, e, now, config)) / len(e.action_space)


@dataclass(frozen=True)
class TighteningResult:
    tightening: bool
    witness: Action | None = None


def check_tightening(
    K: ContractTuple, K2: ContractTuple, e: TaskEpisode, now: float = 0.0, config: Config = DEFAULT_CONFIG
) -> TighteningResult:
    """Check empirically that every action inside under ``K2`` is also inside under ``K``.

    This only covers the declared action space; it is not a proof that the
    revised predicates imply the originals.
    """
    for a in e.action_space:
        if is_inside(a, e, K2, now, config) and not is_inside(a, e, K, now, config):
            return TighteningResult(False, a)
    return TighteningResult(True)


# Contract perturbations -------------------------------------------------------


class PerturbationKind(str, Enum):
    IDENTITY = "identity"
    CLAUSE_REORDER = "clause_reorder"
    NUMERIC_JITTER = "numeric_jitter"
    FIELD_RENAME = "field_rename"
    CLAUSE_DROP = "clause_drop"


@dataclass(frozen=True)
class PerturbationSpec:
    kind: PerturbationKind
    magnitude: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PerturbationKind(self.kind))
        if self.kind is PerturbationKind.NUMERIC_JITTER and self.magnitude < 0:
            raise ValueError("numeric_jitter magnitude must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> PerturbationSpec:
        """Parse ``kind[:magnitude[:seed]]``, e.g. ``numeric_jitter:50:3``."""
        kind, *rest = text.split(":")
        magnitude = float(rest[0]) if rest else 0.0
        seed = int(rest[1]) if len(rest) > 1 else 0
        return cls(PerturbationKind(kind), magnitude, seed)


def _map_conditions(K: ContractTuple, fn) -> ContractTuple:
    sem, inst, proc = K.semantic, K.institutional, K.procedural
    criteria = None if sem.acceptance_criteria is None else tuple(fn(x) for x in sem.acceptance_criteria)
    return replace(
        K,
        semantic=replace(sem, acceptance_criteria=criteria),
        procedural=replace(proc, stop_conditions=tuple(fn(x) for x in proc.stop_conditions)),
        institutional=replace(
            inst,
            autonomous_if=None if inst.autonomous_if is None else fn(inst.autonomous_if),
            escalate_if=None if inst.escalate_if is None else fn(inst.escalate_if),
        ),
    )


def _all_conditions(K: ContractTuple) -> list[Expr]:
    out = list(K.semantic.acceptance_criteria or ())
    out.extend(x for x in (K.institutional.autonomous_if, K.institutional.escalate_if) if x is not None)
    out.extend(K.procedural.stop_conditions)
    return out


def _reorder(K: ContractTuple, rng: random.Random) -> ContractTuple:
    def shuffle(node: Expr) -> Expr:
        if isinstance(node, (And, Or)):
            items = list(node.operands)
            rng.shuffle(items)
            return type(node)(tuple(items), node.span)
        return node

    out = _map_conditions(K, lambda x: transform(x, shuffle))
    criteria = out.semantic.acceptance_criteria
    if criteria:
        items = list(criteria)
        rng.shuffle(items)
        out = replace(out, semantic=replace(out.semantic, acceptance_criteria=tuple(items)))
    return out


def _jitter(K: ContractTuple, magnitude: float, rng: random.Random) -> ContractTuple:
    values = sorted({node.value for expr in _all_conditions(K) for node in walk(expr) if isinstance(node, Num)})
    step = Fraction(repr(float(magnitude)))
    offsets = {v: step * rng.choice((-1, 1)) for v in values}

    def shift(node: Expr) -> Expr:
        if isinstance(node, Num):
            value = node.value + offsets[node.value]
            return Num(value.numerator if value.denominator == 1 else value, node.span)
        return node

    return _map_conditions(K, lambda x: transform(x, shift))


def _rename(K: ContractTuple, rng: random.Random) -> ContractTuple:
    inst = K.institutional
    names = sorted(
        {n.name for expr in (inst.autonomous_if, inst.escalate_if) if expr is not None for n in walk(expr) if isinstance(n, Ident)}
    )
    if not names:
        return K
    target = rng.choice(names)

    def rename(node: Expr) -> Expr:
        if isinstance(node, Ident) and node.name == target:
            return Ident(f"{target}_renamed", node.span)
        return node

    return _map_conditions(K, lambda x: transform(x, rename))


def _drop(K: ContractTuple, rng: random.Random) -> ContractTuple:
    inst = K.institutional
    for name, kind in (("autonomous_if", And), ("escalate_if", Or)):
        expr = getattr(inst, name)
        if isinstance(expr, kind) and len(expr.operands) > 1:
            items = list(expr.operands)
            del items[rng.randrange(len(items))]
            new = items[0] if len(items) == 1 else kind(tuple(items), expr.span)
            return replace(K, institutional=replace(inst, **{name: new}))
    return K


def apply_perturbation(K: ContractTuple, spec: PerturbationSpec) -> ContractTuple:
    rng = random.Random(spec.seed)
    if spec.kind is PerturbationKind.IDENTITY:
        return K
    if spec.kind is PerturbationKind.CLAUSE_REORDER:
        return _reorder(K, rng)
    if spec.kind is PerturbationKind.NUMERIC_JITTER:
        return _jitter(K, spec.magnitude, rng)
    if spec.kind is PerturbationKind.FIELD_RENAME:
        return _rename(K, rng)
    return _drop(K, rng)


def jaccard_distance(a: frozenset, b: frozenset) -> float:
    union = a | b
    if not union:
        return 0.0
    return len(a ^ b) / len(union)


def envelope_stability(
    K: ContractTuple,
    e: TaskEpisode,
    deltas: Sequence[PerturbationSpec],
    now: float,
    config: Config = DEFAULT_CONFIG,
) -> float:
    """One minus the mean normalized symmetric difference of inside-sets under perturbation."""
    if not deltas:
        raise ValueError("perturbation set must be nonempty")
    base = inside_set(K, e, now, config)
    total = sum(jaccard_distance(base, inside_set(apply_perturbation(K, d), e, now, config)) for d in deltas)
    return 1.0 - total / len(deltas)
