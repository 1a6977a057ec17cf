"""Three-valued evaluation of conditions and of the four contract predicates."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from intentc.conditions import And, BoolLit, Compare, Expr, Ident, Not, Num, Or, Span, Str, identifiers, to_source
from intentc.config import DEFAULT_CONFIG, Config
from intentc.model import (
    Action,
    ContractTuple,
    DIMENSIONS,
    Dimension,
    EventTrace,
    EvidenceRecord,
    Scalar,
    SourceRule,
    TaskEpisode,
    action_bindings,
)


class TruthValue(Enum):
    TRUE = "true"
    FALSE = "false"
    UNKNOWN = "unknown"

    @classmethod
    def of(cls, value: bool) -> TruthValue:
        return cls.TRUE if value else cls.FALSE

    def __invert__(self) -> TruthValue:
        if self is TruthValue.UNKNOWN:
            return self
        return TruthValue.FALSE if self is TruthValue.TRUE else TruthValue.TRUE

    def __and__(self, other: TruthValue) -> TruthValue:
        if self is TruthValue.FALSE or other is TruthValue.FALSE:
            return TruthValue.FALSE
        if self is TruthValue.UNKNOWN or other is TruthValue.UNKNOWN:
            return TruthValue.UNKNOWN
        return TruthValue.TRUE

    def __or__(self, other: TruthValue) -> TruthValue:
        if self is TruthValue.TRUE or other is TruthValue.TRUE:
            return TruthValue.TRUE
        if self is TruthValue.UNKNOWN or other is TruthValue.UNKNOWN:
            return TruthValue.UNKNOWN
        return TruthValue.FALSE

    def __bool__(self) -> bool:
        raise TypeError("TruthValue has no two-valued truth; compare against TruthValue.TRUE")


T, F, U = TruthValue.TRUE, TruthValue.FALSE, TruthValue.UNKNOWN


def all_of(values: Iterable[TruthValue]) -> TruthValue:
    out = T
    for v in values:
        if v is F:
            return F
        if v is U:
            out = U
    return out


def any_of(values: Iterable[TruthValue]) -> TruthValue:
    out = F
    for v in values:
        if v is T:
            return T
        if v is U:
            out = U
    return out


class EvaluationError(ValueError):
    """A condition compared values of incompatible types."""

    def __init__(self, message: str, span: Span, source: str = ""):
        super().__init__(f"{message} in {source!r} at {span[0]}:{span[1]}" if source else message)
        self.span = span
        self.source = source


# Expression evaluation --------------------------------------------------------

_MISSING = object()
Bindings = Mapping[str, Scalar]


def _norm(value):
    if isinstance(value, float):
        return Fraction(repr(value))
    return value


def _kind(value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, (int, Fraction)):
        return "number"
    if isinstance(value, str):
        return "string"
    return type(value).__name__


_NUMERIC = frozenset({int, Fraction})  # exact types: bool is excluded

_ORDERED = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _compile_value(expr: Expr) -> Callable[[Bindings], object]:
    """Closure returning a term's value, ``_MISSING`` when unbound or Unknown."""
    if isinstance(expr, Ident):
        name = expr.name
        return lambda b: _norm(b.get(name, _MISSING))
    if isinstance(expr, (Num, Str, BoolLit)):
        value = expr.value
        return lambda b: value
    truth = _compile_truth(expr)

    def compound(b):
        tv = truth(b)
        return _MISSING if tv is U else tv is T

    return compound


def _compile_truth(expr: Expr) -> Callable[[Bindings], TruthValue]:
    if isinstance(expr, BoolLit):
        value = T if expr.value else F
        return lambda b: value
    if isinstance(expr, Ident):
        name, span = expr.name, expr.span

        def ident(b):
            value = b.get(name, _MISSING)
            if value is _MISSING:
                return U
            if value is True:
                return T
            if value is False:
                return F
            raise EvaluationError(f"identifier {name} is a {_kind(_norm(value))}, not a boolean", span, name)

        return ident
    if isinstance(expr, (Num, Str)):
        kind = _kind(expr.value)
        span, source = expr.span, to_source(expr)

        def literal(b):
            raise EvaluationError(f"{kind} literal used as a condition", span, source)

        return literal
    if isinstance(expr, Not):
        inner = _compile_truth(expr.operand)
        return lambda b: ~inner(b)
    if isinstance(expr, And):
        parts = [_compile_truth(x) for x in expr.operands]
        return lambda b: all_of([p(b) for p in parts])
    if isinstance(expr, Or):
        parts = [_compile_truth(x) for x in expr.operands]
        return lambda b: any_of([p(b) for p in parts])
    if isinstance(expr, Compare):
        left, right = _compile_value(expr.left), _compile_value(expr.right)
        op, fn = expr.op, _ORDERED[expr.op]
        span, source = expr.span, to_source(expr)

        def compare(b):
            lv, rv = left(b), right(b)
            if type(lv) in _NUMERIC and type(rv) in _NUMERIC:
                return T if fn(lv, rv) else F
            if lv is _MISSING or rv is _MISSING:
                return U
            lk, rk = _kind(lv), _kind(rv)
            if lk != rk:
                raise EvaluationError(f"type mismatch: {lk} {op} {rk}", span, source)
            if lk != "number" and op not in ("==", "!="):
                raise EvaluationError(f"{lk} values support only == and !=", span, source)
            return T if fn(lv, rv) else F

        return compare
    raise TypeError(f"not an expression: {expr!r}")


def compiled(expr: Expr) -> Callable[[Bindings], TruthValue]:
    """Compiled evaluator for ``expr``, memoized on the node itself.

    Hash-keyed caching would rehash the whole (frozen, recursive) tree on every
    lookup, which dominates evaluation over large action spaces.
    """
    fn = expr.__dict__.get("_truth")
    if fn is None:
        fn = _compile_truth(expr)
        object.__setattr__(expr, "_truth", fn)
    return fn


def eval_expr(expr: Expr, bindings: Bindings) -> TruthValue:
    """Evaluate under strong Kleene semantics; unbound identifiers are Unknown.

    Every operand is evaluated, so a type mismatch is reported even when the
    result is already decided by another operand.
    """
    return compiled(expr)(bindings)


def missing_identifiers(expr: Expr, bindings: Bindings) -> list[str]:
    return [name for name in identifiers(expr) if name not in bindings]


# Contract predicates ----------------------------------------------------------


@dataclass(frozen=True)
class PredicateResult:
    dimension: Dimension
    value: TruthValue
    unresolved_fields: tuple[str, ...] = ()
    probability: float = 0.0
    reasons: tuple[str, ...] = ()


class _Collector:
    def __init__(self, explain: bool = True) -> None:
        self.explain = explain
        self.values: list[TruthValue] = []
        self.unresolved: list[str] = []
        self.reasons: list[str] = []

    def add(self, value: TruthValue, reason: str = "", unresolved: Iterable[str] = ()) -> None:
        self.values.append(value)
        if value is U:
            for name in unresolved:
                if name not in self.unresolved:
                    self.unresolved.append(name)
        if value is not T and reason:
            self.reasons.append(reason)

    def condition(self, expr: Expr, bindings: Bindings, label: str, negate: bool = False) -> None:
        raw = eval_expr(expr, bindings)
        value = ~raw if negate else raw
        if value is T or not self.explain:
            self.values.append(value)
            return
        self.add(value, f"{label}: {to_source(expr)} is {raw.value}", missing_identifiers(expr, bindings))

    def result(self, dim: Dimension, config: Config) -> PredicateResult:
        value = all_of(self.values)
        if value is T:
            probability = 1.0
        elif value is F:
            probability = 0.0
        else:
            probability = config.p_unknown[dim]
        return PredicateResult(dim, value, tuple(self.unresolved), probability, tuple(self.reasons))


def citation_status(rec: EvidenceRecord, rule: SourceRule, now: float) -> tuple[TruthValue, str]:
    """Admissibility of one evidence record under the matching source rule."""
    if rec.admissible_flag is False:
        return F, f"evidence {rec.id} marked inadmissible"
    if rule.max_age_seconds is not None and now - rec.timestamp > rule.max_age_seconds:
        return F, f"evidence {rec.id} is stale ({now - rec.timestamp:g}s > {rule.max_age_seconds:g}s)"
    if rule.provenance_required and not rec.provenance:
        return F, f"evidence {rec.id} lacks provenance"
    if rule.version_match and rec.admissible_flag is None:
        return U, f"evidence {rec.id} not confirmed as current version"
    return T, ""


def citation_admissible(rec: EvidenceRecord | None, K: ContractTuple, now: float) -> bool:
    if rec is None:
        return False
    rule = K.evidentiary.rule_for(rec.source_class)
    return rule is not None and citation_status(rec, rule, now)[0] is T


def workflow_cursor(workflow: tuple[str, ...], step_of_op: Mapping[str, str], trace: EventTrace) -> int:
    """Index of the next unconsumed workflow step after the trace's executions."""
    cursor = 0
    for action in trace.executed():
        if cursor < len(workflow) and step_of_op.get(action.op) == workflow[cursor]:
            cursor += 1
    return cursor


def _semantic(a: Action, e: TaskEpisode, K: ContractTuple, now: float, b: Bindings, out: _Collector) -> None:
    sem = K.semantic
    if sem.entities is None:
        out.add(U, "entities unresolved", ["entities"])
    else:
        for name in sem.entities:
            out.add(T if name in b else U, f"entity {name} unbound", [name])
    if sem.acceptance_criteria is None:
        out.add(U, "acceptance criteria unresolved", ["acceptance_criteria"])
    elif sem.criteria_open:
        out.add(U, "acceptance criteria declared open", ["acceptance_criteria"])
    for expr in sem.acceptance_criteria or ():
        out.condition(expr, b, "acceptance")


def _evidentiary(a: Action, e: TaskEpisode, K: ContractTuple, now: float, b: Bindings, out: _Collector) -> None:
    evid = K.evidentiary
    if evid.admissible_sources is None:
        out.add(U, "admissible sources unresolved", ["admissible_sources"])
        return
    records = e.evidence_by_id()
    cited: set[str] = set()
    for cid in a.citations:
        rec = records.get(cid)
        if rec is None:
            out.add(F, f"citation {cid} does not resolve to an evidence record")
            continue
        cited.add(rec.source_class)
        rule = evid.rule_for(rec.source_class)
        if rule is None:
            out.add(F, f"reject inadmissible source {rec.source_class} ({rec.id})")
            continue
        value, reason = citation_status(rec, rule, now)
        out.add(value, reason, [f"evidence.{rec.id}.current_version"])
    for rule in evid.admissible_sources:
        if rule.required and rule.source_class not in cited:
            out.add(U, f"no citation for required source {rule.source_class}", [f"evidence.{rule.source_class}"])


def _procedural(a: Action, e: TaskEpisode, K: ContractTuple, now: float, b: Bindings, out: _Collector) -> None:
    proc = K.procedural
    if proc.allowed_tools is None:
        out.add(U, "allowed tools unresolved", ["allowed_tools"])
    else:
        out.add(T if a.tool in proc.allowed_tools else F, f"tool {a.tool} not allowed")
    step = proc.step_of_op.get(a.op)
    if proc.workflow is None:
        out.add(U, "workflow unresolved", ["workflow"])
    elif step is None:
        out.add(U, f"operation {a.op} has no workflow step", [f"step_of_op.{a.op}"])
    else:
        cursor = workflow_cursor(proc.workflow, proc.step_of_op, e.trace)
        expected = proc.workflow[cursor] if cursor < len(proc.workflow) else None
        out.add(
            T if step == expected else F,
            f"workflow violation: {a.op} maps to step {step}, next step is {expected or 'none (workflow complete)'}",
        )
    if a.op in proc.rollback_required_ops:
        out.add(T if a.rollback_op else F, f"{a.op} requires a rollback operation")


def _institutional(a: Action, e: TaskEpisode, K: ContractTuple, now: float, b: Bindings, out: _Collector) -> None:
    inst = K.institutional
    if inst.role_permissions is None:
        out.add(U, "role permissions unresolved", ["role_permissions"])
    elif a.actor not in inst.role_permissions:
        out.add(U, f"no role entry for {a.actor}", [f"role_permissions.{a.actor}"])
    else:
        out.add(T if a.op in inst.role_permissions[a.actor] else F, f"{a.actor} lacks permission for {a.op}")
    if inst.autonomous_if is None:
        out.add(U, "autonomous_if unresolved", ["autonomous_if"])
    else:
        out.condition(inst.autonomous_if, b, "autonomous_if")
    if inst.escalate_if is None:
        out.add(U, "escalate_if unresolved", ["escalate_if"])
    else:
        out.condition(inst.escalate_if, b, "escalate_if", negate=True)


_EVALUATORS = {
    Dimension.SEM: _semantic,
    Dimension.EVID: _evidentiary,
    Dimension.PROC: _procedural,
    Dimension.INST: _institutional,
}


def eval_dimension_with(
    dim: Dimension,
    a: Action,
    e: TaskEpisode,
    K: ContractTuple,
    now: float,
    bindings: Bindings,
    config: Config = DEFAULT_CONFIG,
) -> PredicateResult:
    out = _Collector()
    _EVALUATORS[dim](a, e, K, now, bindings, out)
    return out.result(dim, config)


def eval_dimension(
    dim: Dimension | str,
    a: Action,
    e: TaskEpisode,
    K: ContractTuple,
    now: float,
    config: Config = DEFAULT_CONFIG,
) -> PredicateResult:
    """Evaluate one contract predicate for a candidate action."""
    dim = Dimension(dim)
    return eval_dimension_with(dim, a, e, K, now, action_bindings(a, e), config)


_IN_ORDER = tuple(_EVALUATORS[dim] for dim in DIMENSIONS)


def all_true(a: Action, e: TaskEpisode, K: ContractTuple, now: float, bindings: Bindings) -> bool:
    """True iff every dimension evaluates to True; stops at the first that does not.

    Skips reasons and probabilities, so it is the cheap path for set-level scans.
    """
    for evaluate in _IN_ORDER:
        out = _Collector(explain=False)
        evaluate(a, e, K, now, bindings, out)
        if all_of(out.values) is not T:
            return False
    return True
