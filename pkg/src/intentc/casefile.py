"""Episode case files (``.case``): the same YAML subset as intent documents.

::

    id: travel-rebook-001
    policy: travel.intent
    now: 0
    context: {domestic: true, international: false}
    evidence:
      - {id: inv, source_class: airline_inventory_api, timestamp: -300, provenance: gds}
    actions:
      - {id: hold_fare_150, op: hold_fare, actor: travel_agent, tool: fare_hold_api,
         bindings: {fare_delta: 150}, citations: [inv], reversible: true,
         rollback_op: release_fare_hold}
    history:
      - {q: execute, s: -30, f: -29, action: {op: retrieve_booking, actor: travel_agent, tool: booking_api}}
    oracle: {requires_escalation: false, authorized: {hold_fare_150: true}}
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from intentc.document import load_strict_yaml
from intentc.metrics import OracleAnnotations
from intentc.model import Action, Event, EventTrace, EventType, EvidenceRecord, ReviewOutcome, TaskEpisode


class CaseFileError(ValueError):
    pass


@dataclass(frozen=True)
class Case:
    episode: TaskEpisode
    now: float = 0.0
    annotations: OracleAnnotations | None = None
    extra: Mapping[str, Any] | None = None


def _require(data: Mapping[str, Any], key: str, where: str):
    if key not in data:
        raise CaseFileError(f"{where}: missing {key}")
    return data[key]


def action_from_data(data: Mapping[str, Any], where: str = "action") -> Action:
    if not isinstance(data, Mapping):
        raise CaseFileError(f"{where}: expected a mapping")
    return Action(
        op=str(_require(data, "op", where)),
        obj=str(data.get("obj", "")),
        content=str(data.get("content", "")),
        actor=str(data.get("actor", "")),
        tool=str(data.get("tool", "")),
        t=data.get("t", 0),
        bindings=dict(data.get("bindings") or {}),
        citations=tuple(data.get("citations") or ()),
        reversible=bool(data.get("reversible", False)),
        rollback_op=data.get("rollback_op"),
        id=str(data.get("id", "")),
    )


def action_to_data(a: Action) -> dict[str, Any]:
    out: dict[str, Any] = {"id": a.id, "op": a.op, "obj": a.obj, "content": a.content, "actor": a.actor, "tool": a.tool}
    out.update(t=a.t, bindings=dict(a.bindings), citations=list(a.citations), reversible=a.reversible)
    if a.rollback_op is not None:
        out["rollback_op"] = a.rollback_op
    return {k: v for k, v in out.items() if v not in ("", [], {}) or k in ("op",)}


def evidence_from_data(data: Mapping[str, Any], where: str) -> EvidenceRecord:
    return EvidenceRecord(
        id=str(_require(data, "id", where)),
        source_class=str(_require(data, "source_class", where)),
        timestamp=_require(data, "timestamp", where),
        provenance=data.get("provenance"),
        admissible_flag=data.get("admissible"),
        payload=dict(data.get("payload") or {}),
    )


def evidence_to_data(rec: EvidenceRecord) -> dict[str, Any]:
    out: dict[str, Any] = {"id": rec.id, "source_class": rec.source_class, "timestamp": rec.timestamp}
    if rec.provenance is not None:
        out["provenance"] = rec.provenance
    if rec.admissible_flag is not None:
        out["admissible"] = rec.admissible_flag
    if rec.payload:
        out["payload"] = dict(rec.payload)
    return out


def event_from_data(data: Mapping[str, Any], actions: Mapping[str, Action], where: str) -> Event:
    action = data.get("action")
    if isinstance(action, str):
        if action not in actions:
            raise CaseFileError(f"{where}: unknown action {action!r}")
        action = actions[action]
    elif action is not None:
        action = action_from_data(action, f"{where}.action")
    outcome = data.get("review_outcome")
    return Event(
        q=EventType(_require(data, "q", where)),
        s=_require(data, "s", where),
        f=_require(data, "f", where),
        c=data.get("c"),
        action=action,
        ratified=data.get("ratified"),
        review_outcome=None if outcome is None else ReviewOutcome(outcome),
        human_review=bool(data.get("human_review", False)),
    )


def annotations_from_data(data: Mapping[str, Any]) -> OracleAnnotations:
    raters = data.get("rater_labels")
    return OracleAnnotations(
        requires_escalation=bool(data.get("requires_escalation", False)),
        authorized={str(k): bool(v) for k, v in (data.get("authorized") or {}).items()},
        first_best_inside_envelope=bool(data.get("first_best_inside_envelope", False)),
        rater_labels=None if raters is None else tuple(tuple(bool(x) for x in row) for row in raters),
    )


def episode_from_data(data: Mapping[str, Any]) -> TaskEpisode:
    if not isinstance(data, Mapping):
        raise CaseFileError("case file must be a mapping")
    ep_id = str(_require(data, "id", "case"))
    actions = tuple(action_from_data(a, f"actions[{i}]") for i, a in enumerate(data.get("actions") or ()))
    by_key = {a.key: a for a in actions}
    evidence = tuple(evidence_from_data(r, f"evidence[{i}]") for i, r in enumerate(data.get("evidence") or ()))
    history = tuple(event_from_data(ev, by_key, f"history[{i}]") for i, ev in enumerate(data.get("history") or ()))
    return TaskEpisode(
        id=ep_id,
        request=str(data.get("request", "")),
        context=dict(data.get("context") or {}),
        action_space=actions,
        evidence=evidence,
        policy=str(data.get("policy", "")),
        history=EventTrace(ep_id, history),
        requires_escalation=data.get("requires_escalation"),
    )


def load_case(text: str) -> Case:
    data = load_strict_yaml(text)
    episode = episode_from_data(data)
    oracle = data.get("oracle")
    return Case(
        episode=episode,
        now=data.get("now", 0),
        annotations=None if oracle is None else annotations_from_data(oracle),
        extra={k: v for k, v in data.items() if k not in _CASE_KEYS},
    )


_CASE_KEYS = {"id", "request", "context", "actions", "evidence", "policy", "history", "requires_escalation", "now", "oracle"}
