"""Intent documents: loading, serialization and compilation into contracts.

Documents use a strict subset of YAML: block or flow maps and sequences with
plain scalars. Anchors, aliases, explicit tags and multi-document streams are
rejected, and duplicate keys are an error rather than a silent overwrite.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

import yaml

from intentc.conditions import ConditionSyntaxError, Expr, Ident, parse_condition
from intentc.config import DEFAULT_CONFIG, Config
from intentc.model import (
    DIMENSIONS,
    RISK_LEVELS,
    ContractTuple,
    Dimension,
    EvidentiaryContract,
    InstitutionalContract,
    ProceduralContract,
    RiskLevel,
    SemanticContract,
    SourceRule,
)

SECTIONS = (
    "task",
    "semantic_contract",
    "evidentiary_contract",
    "procedural_contract",
    "institutional_contract",
)

SECTION_OF_DIM = {
    Dimension.SEM: "semantic_contract",
    Dimension.EVID: "evidentiary_contract",
    Dimension.PROC: "procedural_contract",
    Dimension.INST: "institutional_contract",
}

KNOWN_KEYS = {
    "task": {"objective", "action_type", "version"},
    "semantic_contract": {"entities", "acceptance_criteria", "ambiguity_policy"},
    "evidentiary_contract": {"admissible_sources", "conflict_resolution", "freshness_clock"},
    "procedural_contract": {
        "workflow",
        "allowed_tools",
        "step_of_op",
        "rollback",
        "rollback_required_ops",
        "stop_conditions",
        "retry_limit",
    },
    "institutional_contract": {
        "autonomous_if",
        "escalate_if",
        "role_permissions",
        "risk_of_op",
        "alpha_map",
        "audit",
        "audit_retention_days",
        "separation_pairs",
        "ordering_rules",
        "cumulative_risk_cap",
        "approved_composites",
    },
}

REQUIRED_FIELDS: dict[Dimension, tuple[str, ...]] = {
    Dimension.SEM: ("entities", "acceptance_criteria", "ambiguity_policy"),
    Dimension.EVID: ("admissible_sources", "conflict_resolution"),
    Dimension.PROC: ("workflow", "allowed_tools", "rollback"),
    Dimension.INST: ("autonomous_if", "escalate_if", "role_permissions", "risk_of_op", "audit_retention_days"),
}

AMBIGUITY_MOVES = {"ask", "escalate", "abstain"}


class IntentDocumentError(ValueError):
    """Syntax or structure error in an intent document, with 1-based position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.message = message
        self.line = line
        self.column = column


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class IntentDocument:
    task: dict[str, Any]
    semantic_contract: dict[str, Any] | None = None
    evidentiary_contract: dict[str, Any] | None = None
    procedural_contract: dict[str, Any] | None = None
    institutional_contract: dict[str, Any] | None = None
    extra: dict[str, Any] = field(default_factory=dict)
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def section(self, name: str) -> dict[str, Any] | None:
        return getattr(self, name)

    @property
    def action_type(self) -> str | None:
        value = self.task.get("action_type")
        return value if isinstance(value, str) else None


# Loading --------------------------------------------------------------------

_STR = "tag:yaml.org,2002:str"
_BOOL = "tag:yaml.org,2002:bool"
_NULL = "tag:yaml.org,2002:null"
_INT = "tag:yaml.org,2002:int"
_FLOAT = "tag:yaml.org,2002:float"


def _mark(node_or_event) -> tuple[int, int]:
    mark = node_or_event.start_mark
    return mark.line + 1, mark.column + 1


class _Builder:
    def __init__(self) -> None:
        self._scalars = yaml.constructor.SafeConstructor()

    def build(self, node: yaml.Node) -> Any:
        if isinstance(node, yaml.MappingNode):
            out: dict[str, Any] = {}
            for key_node, value_node in node.value:
                if not isinstance(key_node, yaml.ScalarNode) or key_node.tag == "tag:yaml.org,2002:merge":
                    raise IntentDocumentError("keys must be plain scalars", *_mark(key_node))
                key = str(key_node.value)
                if key in out:
                    raise IntentDocumentError(f"duplicate key {key!r}", *_mark(key_node))
                out[key] = self.build(value_node)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self.build(x) for x in node.value]
        return self.scalar(node)

    def scalar(self, node: yaml.ScalarNode) -> Any:
        if node.tag == _BOOL:
            if node.value.lower() in ("true", "false"):
                return node.value.lower() == "true"
            return node.value
        if node.tag == _NULL:
            return None
        if node.tag in (_INT, _FLOAT):
            value = self._scalars.construct_object(node)
            if isinstance(value, float) and not math.isfinite(value):
                raise IntentDocumentError("non-finite number", *_mark(node))
            return value
        if node.tag == _STR or node.tag.startswith("tag:yaml.org,2002:"):
            return str(node.value)
        raise IntentDocumentError(f"explicit tag {node.tag!r} not supported", *_mark(node))


def load_strict_yaml(text: str) -> Any:
    """Parse the restricted YAML subset into plain dicts, lists and scalars."""
    try:
        documents = 0
        for event in yaml.parse(text, Loader=yaml.SafeLoader):
            if isinstance(event, yaml.DocumentStartEvent):
                documents += 1
                if documents > 1:
                    raise IntentDocumentError("multiple documents not supported", *_mark(event))
            if isinstance(event, yaml.AliasEvent) or getattr(event, "anchor", None):
                raise IntentDocumentError("anchors and aliases not supported", *_mark(event))
            tag = getattr(event, "tag", None)
            if tag and isinstance(event, (yaml.ScalarEvent, yaml.MappingStartEvent, yaml.SequenceStartEvent)):
                implicit = event.implicit
                # Scalars carry (plain, quoted) implicit flags; collections a single bool.
                explicit = not any(implicit) if isinstance(implicit, tuple) else not implicit
                if explicit or tag.startswith("!"):
                    raise IntentDocumentError(f"explicit tag {tag!r} not supported", *_mark(event))
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line, column = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise IntentDocumentError(f"syntax error: {exc.problem or exc.context}", line, column) from None
    if node is None:
        return None
    return _Builder().build(node)


def parse_intent_document(text: str) -> IntentDocument:
    """Parse an intent document.

    Unknown keys are preserved and reported in ``diagnostics``; an absent
    contract section is stored as ``None`` so compilation marks all of its
    fields unresolved.
    """
    data = load_strict_yaml(text)
    if data is None:
        raise IntentDocumentError("missing task section")
    if not isinstance(data, dict):
        raise IntentDocumentError("document must be a mapping of sections")
    if "task" not in data:
        raise IntentDocumentError("missing task section")
    diagnostics: list[str] = []
    sections: dict[str, Any] = {}
    for name in SECTIONS:
        if name not in data:
            continue
        body = data[name]
        if body is None:
            body = {}
        if not isinstance(body, dict):
            raise IntentDocumentError(f"section {name} must be a mapping")
        for key in body:
            if key not in KNOWN_KEYS[name]:
                diagnostics.append(f"{name}: unknown key {key}")
        sections[name] = body
    extra = {k: v for k, v in data.items() if k not in SECTIONS}
    diagnostics.extend(f"unknown key {k}" for k in extra)
    return IntentDocument(extra=extra, diagnostics=tuple(diagnostics), **sections)


def document_to_data(doc: IntentDocument) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for name in SECTIONS:
        body = doc.section(name)
        if body is not None:
            out[name] = body
    out.update(doc.extra)
    return out


def serialize_intent_document(doc: IntentDocument) -> str:
    return yaml.safe_dump(document_to_data(doc), sort_keys=False, allow_unicode=True, default_flow_style=False)


# Profiles -------------------------------------------------------------------


def builtin_profiles() -> dict[str, dict[str, Any]]:
    """Standing contract defaults keyed by ``task.action_type``.

    A profile is a partial document; it fills keys that a document leaves out
    of a section it does declare. It never creates a missing section.
    """
    out = {}
    for entry in resources.files("intentc.profiles").iterdir():
        if entry.name.endswith(".intent"):
            out[entry.name[: -len(".intent")]] = load_strict_yaml(entry.read_text(encoding="utf-8")) or {}
    return out


# Compilation ----------------------------------------------------------------

_OPERATOR_CHARS = re.compile(r"[&|<>=!()\"]")
_AGE_RE = re.compile(r"^<\s*(\d+(?:\.\d+)?)\s*(s|sec|min|h|hr)$")
_AGE_UNITS = {"s": 1, "sec": 1, "min": 60, "h": 3600, "hr": 3600}
_AUDIT_RE = re.compile(r"^retain_logs_(-?\d+)_days?$")
_ORDER_RE = re.compile(r"^\s*(\S+)\s+before\s+(\S+)\s*$")


def slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")


def compile_condition(text: Any, where: str) -> Expr:
    if isinstance(text, bool):
        text = "true" if text else "false"
    if not isinstance(text, str):
        raise CompileError(f"{where}: condition must be a string")
    try:
        return parse_condition(text)
    except ConditionSyntaxError as exc:
        raise CompileError(f"{where}: unparseable condition {text!r}: {exc}") from None


def compile_criterion(text: Any, where: str) -> Expr:
    """Compile an acceptance criterion.

    Criteria written in the condition language are parsed as such. Prose
    criteria without operator characters become a boolean check named by the
    slug of the text, e.g. "same cabin unless approved" reads the binding
    ``same_cabin_unless_approved``.
    """
    if isinstance(text, str):
        try:
            return parse_condition(text)
        except ConditionSyntaxError:
            if _OPERATOR_CHARS.search(text) or not slug(text):
                raise CompileError(f"{where}: unparseable condition {text!r}") from None
            return Ident(slug(text))
    return compile_condition(text, where)


def _str_list(value: Any, where: str) -> tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
        raise CompileError(f"{where}: expected a list of strings")
    return tuple(value)


def compile_source_rule(spec: Any, where: str) -> SourceRule:
    if isinstance(spec, dict):
        age = spec.get("max_age_seconds")
        rule = SourceRule(
            source_class=str(spec["source_class"]),
            max_age_seconds=None if age is None else float(age),
            provenance_required=bool(spec.get("provenance_required", False)),
            version_match=bool(spec.get("version_match", False)),
            required=bool(spec.get("required", True)),
        )
    elif isinstance(spec, str):
        name, *modifiers = [part.strip() for part in spec.split(":")]
        required = not name.endswith("?")
        name = name.rstrip("?")
        max_age = None
        provenance = version = False
        for mod in modifiers:
            m = _AGE_RE.match(mod)
            if m:
                max_age = float(m.group(1)) * _AGE_UNITS[m.group(2)]
            elif mod == "current_version":
                provenance = version = True
            elif mod == "provenance":
                provenance = True
            else:
                raise CompileError(f"{where}: unknown source modifier {mod!r}")
        rule = SourceRule(name, max_age, provenance, version, required)
    else:
        raise CompileError(f"{where}: source rule must be a string or mapping")
    if not rule.source_class:
        raise CompileError(f"{where}: empty source class")
    if rule.max_age_seconds is not None and rule.max_age_seconds <= 0:
        raise CompileError(f"{where}: max_age_seconds must be positive")
    return rule


def compile_conflict_resolution(value: Any, where: str) -> tuple[str, ...]:
    """Turn "policy overrides preference" into the priority list (policy, preference)."""
    if isinstance(value, list):
        return _str_list(value, where)
    if isinstance(value, str):
        parts = [p.strip() for p in re.split(r"\s+overrides\s+|\s*>\s*", value) if p.strip()]
        return tuple(parts)
    raise CompileError(f"{where}: expected a string or list")


def _pairs(value: Any, where: str, parse_text=None) -> tuple[tuple[str, str], ...]:
    if not isinstance(value, list):
        raise CompileError(f"{where}: expected a list")
    out = []
    for i, item in enumerate(value):
        if isinstance(item, list) and len(item) == 2 and all(isinstance(x, str) for x in item):
            out.append((item[0], item[1]))
        elif isinstance(item, str) and parse_text is not None and parse_text.match(item):
            m = parse_text.match(item)
            out.append((m.group(1), m.group(2)))
        else:
            raise CompileError(f"{where}[{i}]: expected a pair of operations")
    return tuple(out)


def _risk(value: Any, where: str) -> RiskLevel:
    try:
        return RiskLevel(value)
    except ValueError:
        raise CompileError(f"{where}: unknown risk level {value!r}") from None


def compile_alpha_map(declared: Mapping[str, Any] | None, defaults: Mapping[RiskLevel, float]) -> dict[RiskLevel, float]:
    """Validate declared thresholds and fill undeclared levels from ``defaults``.

    Declared values must be nondecreasing in risk order. Undeclared levels take
    their default clamped between the neighbouring declared values.
    """
    given: dict[RiskLevel, float] = {}
    for key, value in (declared or {}).items():
        level = _risk(key, "alpha_map")
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0 <= value <= 1:
            raise CompileError(f"alpha_map.{key}: threshold must be a number in [0, 1]")
        given[level] = float(value)
    ordered = [given[level] for level in RISK_LEVELS if level in given]
    if any(b < a for a, b in zip(ordered, ordered[1:])):
        raise CompileError("alpha_map not nondecreasing")
    out: dict[RiskLevel, float] = {}
    floor = 0.0
    for level in RISK_LEVELS:
        if level in given:
            value = given[level]
        else:
            upper = min((given[x] for x in RISK_LEVELS[level.rank + 1 :] if x in given), default=1.0)
            value = min(max(defaults[level], floor), upper)
        out[level] = floor = value
    return out


def _audit_days(body: Mapping[str, Any], notes: list[str]) -> int | None:
    if "audit_retention_days" in body:
        value = body["audit_retention_days"]
        if isinstance(value, bool) or not isinstance(value, int):
            raise CompileError("institutional_contract.audit_retention_days: expected an integer")
        days = value
    elif "audit" in body:
        value = body["audit"]
        m = _AUDIT_RE.match(value) if isinstance(value, str) else None
        if m is None:
            notes.append(f"institutional_contract.audit: clause {value!r} not understood")
            return None
        days = int(m.group(1))
    else:
        return None
    if days < 0:
        raise CompileError("negative retention")
    return days


def _fill_from_profile(
    doc: IntentDocument, profiles: Mapping[str, Mapping[str, Any]], notes: list[str]
) -> dict[str, dict[str, Any] | None]:
    sections: dict[str, dict[str, Any] | None] = {}
    profile_name = doc.action_type
    profile = profiles.get(profile_name, {}) if profile_name else {}
    for dim in DIMENSIONS:
        name = SECTION_OF_DIM[dim]
        body = doc.section(name)
        if body is None:
            sections[name] = None
            continue
        body = dict(body)
        for key, value in (profile.get(name) or {}).items():
            if key not in body:
                body[key] = value
                notes.append(f"{name}.{key} supplied by profile {profile_name}")
        sections[name] = body
    return sections


def _compile_semantic(body, notes) -> tuple[SemanticContract, list[str]]:
    missing = []
    entities = criteria = policy = None
    criteria_open = False
    if "entities" in body:
        entities = _str_list(body["entities"], "semantic_contract.entities")
    if "acceptance_criteria" in body:
        raw = body["acceptance_criteria"]
        if raw == "open":
            criteria, criteria_open = (), True
        else:
            items = raw if isinstance(raw, list) else [raw]
            criteria = tuple(
                compile_criterion(text, f"semantic_contract.acceptance_criteria[{i}]") for i, text in enumerate(items)
            )
            if not criteria:
                criteria = None
    if "ambiguity_policy" in body:
        raw = body["ambiguity_policy"]
        if not isinstance(raw, dict):
            raise CompileError("semantic_contract.ambiguity_policy: expected a mapping")
        for key, move in raw.items():
            if move not in AMBIGUITY_MOVES:
                raise CompileError(f"semantic_contract.ambiguity_policy.{key}: unknown move {move!r}")
        policy = dict(raw)
    for name, value in (("entities", entities), ("acceptance_criteria", criteria), ("ambiguity_policy", policy)):
        if value is None:
            missing.append(name)
    return SemanticContract(entities, criteria, policy, criteria_open), missing


def _compile_evidentiary(body, notes) -> tuple[EvidentiaryContract, list[str]]:
    missing = []
    sources = order = None
    if "admissible_sources" in body:
        raw = body["admissible_sources"]
        if not isinstance(raw, list):
            raise CompileError("evidentiary_contract.admissible_sources: expected a list")
        sources = tuple(
            compile_source_rule(spec, f"evidentiary_contract.admissible_sources[{i}]") for i, spec in enumerate(raw)
        )
        if len({r.source_class for r in sources}) != len(sources):
            raise CompileError("evidentiary_contract.admissible_sources: duplicate source class")
    if "conflict_resolution" in body:
        order = compile_conflict_resolution(body["conflict_resolution"], "evidentiary_contract.conflict_resolution")
    clock = str(body.get("freshness_clock", "episode"))
    if sources is None:
        missing.append("admissible_sources")
    if order is None:
        missing.append("conflict_resolution")
    return EvidentiaryContract(sources, order, clock), missing


def _compile_procedural(body, notes) -> tuple[ProceduralContract, list[str]]:
    missing = []
    workflow = tools = None
    if "workflow" in body:
        workflow = _str_list(body["workflow"], "procedural_contract.workflow")
        if len(set(workflow)) != len(workflow):
            raise CompileError("procedural_contract.workflow: duplicate step")
    if "allowed_tools" in body:
        tools = frozenset(_str_list(body["allowed_tools"], "procedural_contract.allowed_tools"))
    if "step_of_op" in body:
        raw = body["step_of_op"]
        if not isinstance(raw, dict) or not all(isinstance(v, str) for v in raw.values()):
            raise CompileError("procedural_contract.step_of_op: expected a mapping of op to step")
        step_of_op = dict(raw)
    elif workflow is not None:
        step_of_op = {step: step for step in workflow}
        notes.append("procedural_contract.step_of_op defaulted to workflow step names")
    else:
        step_of_op = {}
    if workflow is not None:
        for op, step in step_of_op.items():
            if step not in workflow:
                raise CompileError(f"procedural_contract.step_of_op.{op}: step {step!r} not in workflow")
    rollback = body.get("rollback")
    if rollback is not None and not isinstance(rollback, str):
        raise CompileError("procedural_contract.rollback: expected an operation name")
    required_ops = frozenset(_str_list(body.get("rollback_required_ops", []), "procedural_contract.rollback_required_ops"))
    stops = tuple(
        compile_condition(text, f"procedural_contract.stop_conditions[{i}]")
        for i, text in enumerate(body.get("stop_conditions", []) or [])
    )
    retry = body.get("retry_limit", 3)
    if isinstance(retry, bool) or not isinstance(retry, int) or retry < 0:
        raise CompileError("procedural_contract.retry_limit: expected a nonnegative integer")
    for name, value in (("workflow", workflow), ("allowed_tools", tools), ("rollback", rollback)):
        if value is None:
            missing.append(name)
    return ProceduralContract(workflow, tools, step_of_op, rollback, required_ops, stops, retry), missing


def _compile_institutional(body, notes, config: Config) -> tuple[InstitutionalContract, list[str]]:
    missing = []
    auto = esc = roles = risk = None
    if "autonomous_if" in body:
        auto = compile_condition(body["autonomous_if"], "institutional_contract.autonomous_if")
    if "escalate_if" in body:
        esc = compile_condition(body["escalate_if"], "institutional_contract.escalate_if")
    if "role_permissions" in body:
        raw = body["role_permissions"]
        if not isinstance(raw, dict):
            raise CompileError("institutional_contract.role_permissions: expected a mapping")
        roles = {
            actor: frozenset(_str_list(ops or [], f"institutional_contract.role_permissions.{actor}"))
            for actor, ops in raw.items()
        }
    if "risk_of_op" in body:
        raw = body["risk_of_op"]
        if not isinstance(raw, dict):
            raise CompileError("institutional_contract.risk_of_op: expected a mapping")
        risk = {op: _risk(level, f"institutional_contract.risk_of_op.{op}") for op, level in raw.items()}
    alpha = compile_alpha_map(body.get("alpha_map"), config.alpha_map)
    days = _audit_days(body, notes)
    separation = _pairs(body.get("separation_pairs", []), "institutional_contract.separation_pairs")
    ordering = _pairs(body.get("ordering_rules", []), "institutional_contract.ordering_rules", _ORDER_RE)
    cap = body.get("cumulative_risk_cap")
    if cap is not None and (isinstance(cap, bool) or not isinstance(cap, (int, float))):
        raise CompileError("institutional_contract.cumulative_risk_cap: expected a number")
    composites = frozenset(
        _str_list(body.get("approved_composites", []), "institutional_contract.approved_composites")
    )
    for name, value in (
        ("autonomous_if", auto),
        ("escalate_if", esc),
        ("role_permissions", roles),
        ("risk_of_op", risk),
        ("audit_retention_days", days),
    ):
        if value is None:
            missing.append(name)
    contract = InstitutionalContract(
        autonomous_if=auto,
        escalate_if=esc,
        role_permissions=roles,
        risk_of_op=risk,
        alpha_map=alpha,
        audit_retention_days=days,
        separation_pairs=separation,
        ordering_rules=ordering,
        cumulative_risk_cap=None if cap is None else float(cap),
        approved_composites=composites,
    )
    return contract, missing


def compile_contracts(
    doc: IntentDocument,
    profiles: Mapping[str, Mapping[str, Any]] | None = None,
    config: Config = DEFAULT_CONFIG,
) -> ContractTuple:
    """Compile a parsed document into a contract tuple.

    Every required field that is neither in the document nor supplied by the
    action-type profile is listed under ``unresolved`` for its dimension.
    Pass ``profiles={}`` to compile the document on its own.
    """
    if profiles is None:
        profiles = builtin_profiles()
    notes = list(doc.diagnostics)
    sections = _fill_from_profile(doc, profiles, notes)
    compilers = {
        Dimension.SEM: _compile_semantic,
        Dimension.EVID: _compile_evidentiary,
        Dimension.PROC: _compile_procedural,
        Dimension.INST: lambda body, notes: _compile_institutional(body, notes, config),
    }
    contracts = {}
    unresolved: dict[Dimension, tuple[str, ...]] = {}
    for dim in DIMENSIONS:
        body = sections[SECTION_OF_DIM[dim]]
        contract, missing = compilers[dim](body or {}, notes)
        contracts[dim] = contract
        unresolved[dim] = tuple(missing)
    return ContractTuple(
        semantic=contracts[Dimension.SEM],
        evidentiary=contracts[Dimension.EVID],
        procedural=contracts[Dimension.PROC],
        institutional=contracts[Dimension.INST],
        unresolved=unresolved,
        notes=tuple(notes),
    )


def compile_text(text: str, **kwargs) -> ContractTuple:
    return compile_contracts(parse_intent_document(text), **kwargs)
