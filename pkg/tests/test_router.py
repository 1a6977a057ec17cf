from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentc import compile_text
from intentc.envelope import membership
from intentc.document import (
    IntentDocument,
    compile_contracts,
    load_strict_yaml,
    parse_intent_document,
    serialize_intent_document,
)
from intentc.model import Dimension, TaskEpisode
from intentc.router import ClosureGaps, MoveKind, ProxySignals, estimate_gaps, route

counts = st.integers(0, 50)


def test_fully_specified_contract_has_zero_gaps(travel_contract, travel_case):
    gaps = estimate_gaps(travel_case.episode, travel_contract)
    assert gaps.as_dict() == {"sem": 0.0, "evid": 0.0, "proc": 0.0, "inst": 0.0}


def test_task_only_document_has_full_gaps(travel_case):
    K = compile_text("task:\n  objective: rebook\n")
    gaps = estimate_gaps(travel_case.episode, K)
    assert all(gaps[d] == 1.0 for d in Dimension)


def test_signal_term(travel_contract, travel_case):
    gaps = estimate_gaps(travel_case.episode, travel_contract, ProxySignals(clarification_count=1, retry_depth=3))
    assert gaps.sem == pytest.approx(0.25 * 1 / 2)
    assert gaps.proc == pytest.approx(0.25 * 3 / 4)


def test_candidate_unresolved_fields_count_toward_gap(travel_contract, travel_case):
    a = travel_case.episode.find_action("hold_fare_150")
    vague = replace(a, bindings={k: v for k, v in a.bindings.items() if k != "fare_delta"})
    gaps = estimate_gaps(travel_case.episode, travel_contract, candidate=vague)
    assert gaps.inst == pytest.approx(1 / 5)


@given(counts, counts, counts, counts, st.integers(0, 5), st.integers(0, 4))
def test_gaps_monotone_in_signals(c, e, r, p, bump, which):
    """More signal never lowers a gap, and gaps stay in [0, 1]."""
    K = compile_text("task:\n  objective: x\nsemantic_contract:\n  entities: [a]\n")
    ep = TaskEpisode("e")
    base = [c, e, r, p]
    more = list(base)
    more[which % 4] += bump
    g1 = estimate_gaps(ep, K, ProxySignals(*base))
    g2 = estimate_gaps(ep, K, ProxySignals(*more))
    for d in Dimension:
        assert 0.0 <= g1[d] <= g2[d] <= 1.0


def test_negative_signals_rejected():
    with pytest.raises(ValueError):
        ProxySignals(retry_depth=-1)
    with pytest.raises(ValueError):
        ClosureGaps(sem=1.5)


def _decision(travel_contract, travel_case, key="hold_fare_150", now=0.0):
    return membership(travel_case.episode.find_action(key), travel_case.episode, travel_contract, now)


@pytest.mark.parametrize(
    "gaps, move",
    [
        (ClosureGaps(sem=1, evid=1, proc=1, inst=1), MoveKind.ESCALATE),
        (ClosureGaps(sem=1, evid=1, proc=1), MoveKind.SIMULATE),
        (ClosureGaps(sem=1, evid=1), MoveKind.RETRIEVE),
        (ClosureGaps(sem=1), MoveKind.ASK),
        (ClosureGaps(sem=0.3, evid=0.3, proc=0.3, inst=0.3), MoveKind.ACT),  # threshold is strict
    ],
)
def test_priority_order(travel_contract, travel_case, gaps, move):
    assert route(gaps, _decision(travel_contract, travel_case)).kind is move


def test_verdict_drives_route_when_gaps_small(travel_contract, travel_case):
    zero = ClosureGaps()
    assert route(zero, _decision(travel_contract, travel_case)).kind is MoveKind.ACT
    assert route(zero, _decision(travel_contract, travel_case), checker_pass=False).kind is MoveKind.SEARCH
    outside = route(zero, _decision(travel_contract, travel_case, "purchase_251"))
    assert outside.kind is MoveKind.ESCALATE and outside.target_dimension is Dimension.INST
    a = travel_case.episode.find_action("hold_fare_150")
    vague = replace(a, bindings={k: v for k, v in a.bindings.items() if k != "fare_delta"})
    boundary = membership(vague, travel_case.episode, travel_contract, 0.0)
    assert route(zero, boundary).kind is MoveKind.ASK


def test_abstain_without_escalation_path(travel_contract, travel_case):
    inst = replace(travel_contract.institutional, escalate_if=None, role_permissions=None)
    K = replace(travel_contract, institutional=inst)
    decision = _decision(travel_contract, travel_case, "purchase_251")
    assert route(ClosureGaps(), decision, contracts=K).kind is MoveKind.ABSTAIN
    assert route(ClosureGaps(inst=1.0), decision, contracts=K).kind is MoveKind.ABSTAIN
    assert route(ClosureGaps(), decision, contracts=travel_contract).kind is MoveKind.ESCALATE


def test_custom_thresholds(travel_contract, travel_case):
    thresholds = {d: 0.9 for d in Dimension}
    gaps = ClosureGaps(inst=0.8)
    assert route(gaps, _decision(travel_contract, travel_case), thresholds=thresholds).kind is MoveKind.ACT


def _field_keys(text):
    data = load_strict_yaml(text)
    return data, [(s, k) for s, body in data.items() if s != "task" for k in body]


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_resolving_fields_never_raises_a_gap(travel_text, travel_case, data):
    full, keys = _field_keys(travel_text)
    dropped = data.draw(st.sets(st.sampled_from(keys)))
    fewer = data.draw(st.sets(st.sampled_from(sorted(dropped)))) if dropped else set()

    def gaps_without(removed):
        doc = {s: ({k: v for k, v in body.items() if (s, k) not in removed} if s != "task" else body)
               for s, body in full.items()}
        text = serialize_intent_document(IntentDocument(**doc))
        K = compile_contracts(parse_intent_document(text), profiles={})
        return estimate_gaps(travel_case.episode, K)

    more_open, less_open = gaps_without(dropped), gaps_without(fewer)
    for d in Dimension:
        assert less_open[d] <= more_open[d]
