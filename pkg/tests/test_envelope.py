import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import grid_episode, random_condition, simple_contract

from intentc.config import Config
from intentc.conditions import And, parse_condition, to_source
from intentc.envelope import (
    Band,
    PerturbationKind,
    PerturbationSpec,
    Verdict,
    apply_perturbation,
    authorization_band,
    check_tightening,
    envelope_size,
    envelope_stability,
    inside_set,
    is_inside,
    jaccard_distance,
    membership,
    prob_membership,
    sequence_membership,
)
from intentc.model import Action, Dimension, RiskLevel, TaskEpisode
from intentc.predicates import TruthValue


def _act(case, key):
    return case.episode.find_action(key)


def test_inside_hold_has_joint_probability_one(travel_contract, travel_case):
    d = membership(_act(travel_case, "hold_fare_150"), travel_case.episode, travel_contract, travel_case.now)
    assert d.verdict is Verdict.INSIDE and d.joint_probability == 1.0 and d.reasons == ()


def test_purchase_fails_only_institutionally(travel_contract, travel_case):
    d = membership(_act(travel_case, "purchase_250"), travel_case.episode, travel_contract, travel_case.now)
    assert d.dims_with(TruthValue.FALSE) == [Dimension.INST]
    assert any("lacks permission" in r for r in d.reasons)


def test_stale_inventory_moves_hold_outside_evidentiary(travel_contract, travel_case):
    d = membership(_act(travel_case, "hold_fare_150"), travel_case.episode, travel_contract, 700.0)
    assert d.summary() == "outside: evidentiary"


def test_missing_binding_is_boundary(travel_contract, travel_case):
    a = _act(travel_case, "hold_fare_150")
    bindings = {k: v for k, v in a.bindings.items() if k != "fare_delta"}
    d = membership(replace(a, bindings=bindings), travel_case.episode, travel_contract, travel_case.now)
    assert d.verdict is Verdict.BOUNDARY
    assert d.per_dim[Dimension.INST].unresolved_fields == ("fare_delta",)


def test_is_inside_agrees_with_membership(travel_contract, travel_case):
    e = travel_case.episode
    for a in e.action_space:
        for now in (0.0, 700.0):
            assert is_inside(a, e, travel_contract, now) == (membership(a, e, travel_contract, now).verdict is Verdict.INSIDE)


# Probabilistic envelope -----------------------------------------------------------


@pytest.mark.parametrize(
    "p, band",
    [(0.95, Band.AUTHORIZE), (0.96, Band.AUTHORIZE), (0.9, Band.ASK), (0.94, Band.ASK), (0.8999, Band.DENY)],
)
def test_bands(p, band):
    assert authorization_band(p, alpha=0.95, beta=0.05) is band


def test_prob_membership_uses_risk_threshold(travel_contract, travel_case):
    e, now = travel_case.episode, travel_case.now
    hold = prob_membership(_act(travel_case, "hold_fare_150"), e, travel_contract, now)
    assert hold.authorized and hold.risk is RiskLevel.LOW and hold.alpha == 0.6
    purchase = prob_membership(_act(travel_case, "purchase_250"), e, travel_contract, now)
    assert purchase.band is Band.DENY and purchase.alpha == 0.95

    a = _act(travel_case, "hold_fare_150")
    vague = replace(a, bindings={k: v for k, v in a.bindings.items() if k != "fare_delta"})
    assert prob_membership(vague, e, travel_contract, now).band is Band.DENY  # 0.5 < 0.6 - 0.05
    lenient = Config(p_unknown={d: 0.57 for d in Dimension})
    assert prob_membership(vague, e, travel_contract, now, lenient).band is Band.ASK


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5))
def test_band_regions_partition(p, alpha, beta):
    band = authorization_band(p, alpha, beta)
    assert (band is Band.AUTHORIZE) == (p >= alpha)
    assert (band is Band.DENY) == (p < alpha - beta)


# Sequences ---------------------------------------------------------------------


def test_sequence_of_one_inside_action(travel_contract, travel_case):
    v = sequence_membership([_act(travel_case, "hold_fare_150")], travel_case.episode, travel_contract, 0.0)
    assert v.allowed


def test_sequence_component_sees_earlier_components(travel_contract, travel_case):
    hold = _act(travel_case, "hold_fare_150")
    v = sequence_membership([hold, hold], travel_case.episode, travel_contract, 0.0)
    assert not v.allowed
    assert [i for i, _ in v.component_failures] == [1]  # workflow already past the hold step


def test_rollback_dependency(travel_contract, travel_case):
    hold = replace(_act(travel_case, "hold_fare_150"), rollback_op=None)
    v = sequence_membership([hold], travel_case.episode, travel_contract, 0.0)
    assert "rollback_dependency" in v.global_violations


def _ops_contract(**inst):
    K = simple_contract(parse_condition("true"), **inst)
    ops = frozenset({"draft", "approve", "pay"})
    proc = replace(K.procedural, workflow=("draft", "approve", "pay"), step_of_op={o: o for o in ops})
    return replace(K, procedural=proc, institutional=replace(K.institutional, role_permissions={"a": ops, "b": ops}))


def _seq(*pairs):
    return [Action(op, actor=actor, tool="tool") for op, actor in pairs]


def test_separation_of_duties():
    K = _ops_contract(separation_pairs=(("approve", "pay"),))
    e = TaskEpisode("e")
    assert sequence_membership(_seq(("draft", "a"), ("approve", "b"), ("pay", "a")), e, K, 0.0).allowed
    v = sequence_membership(_seq(("draft", "a"), ("approve", "a"), ("pay", "a")), e, K, 0.0)
    assert v.global_violations == ("separation_of_duties",)


def test_ordering_rule_and_cumulative_cap():
    K = _ops_contract(ordering_rules=(("approve", "pay"),), cumulative_risk_cap=1.0)
    e = TaskEpisode("e")
    v = sequence_membership(_seq(("pay", "a")), e, K, 0.0)
    assert "ordering" in v.global_violations
    # Three ops at the default high risk (0.75 each) exceed a cap of 1.0.
    v = sequence_membership(_seq(("draft", "a"), ("approve", "b"), ("pay", "a")), e, K, 0.0)
    assert v.global_violations == ("cumulative_risk",)


def test_approved_composite_waives_component_institutional_checks():
    K = _ops_contract(approved_composites=frozenset({"release"}))
    K = replace(K, institutional=replace(K.institutional, role_permissions={"a": frozenset()}))
    seq, e = _seq(("draft", "a"), ("approve", "a")), TaskEpisode("e")
    assert not sequence_membership(seq, e, K, 0.0).allowed
    assert sequence_membership(seq, e, K, 0.0, composite_id="release").allowed


def test_empty_sequence_rejected(travel_contract, travel_case):
    with pytest.raises(ValueError):
        sequence_membership([], travel_case.episode, travel_contract, 0.0)


# Set measures ------------------------------------------------------------------


def test_envelope_size_of_travel_case(travel_contract, travel_case):
    assert envelope_size(travel_contract, travel_case.episode, 0.0) == 0.25
    with pytest.raises(ValueError, match="empty action space"):
        envelope_size(travel_contract, TaskEpisode("e"), 0.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32))
def test_adding_a_conjunct_is_a_tightening(seed):
    rng = random.Random(seed)
    e = grid_episode(rng, 40)
    base = random_condition(rng)
    K, K2 = simple_contract(base), simple_contract(And((base, random_condition(rng, 1))))
    assert check_tightening(K, K2, e).tightening
    assert inside_set(K2, e, 0.0) <= inside_set(K, e, 0.0)


def test_tightening_witness(travel_contract, travel_case):
    loose_inst = replace(travel_contract.institutional, autonomous_if=parse_condition("domestic && same_cabin"),
                         escalate_if=parse_condition("international || visa_risk"))
    loose = replace(travel_contract, institutional=loose_inst)
    e = replace(travel_case.episode, action_space=(
        _act(travel_case, "hold_fare_150"),
        replace(_act(travel_case, "hold_fare_150"), bindings={**_act(travel_case, "hold_fare_150").bindings, "fare_delta": 300}),
    ))
    result = check_tightening(travel_contract, loose, e)
    assert not result.tightening and result.witness.bindings["fare_delta"] == 300
    assert check_tightening(loose, travel_contract, e).tightening


@given(st.frozensets(st.integers(0, 9)), st.frozensets(st.integers(0, 9)))
def test_jaccard_distance_properties(a, b):
    d = jaccard_distance(a, b)
    assert 0.0 <= d <= 1.0
    assert d == jaccard_distance(b, a)
    assert (d == 0.0) == (a == b)


# Perturbations -----------------------------------------------------------------


def test_perturbation_spec_parse():
    assert PerturbationSpec.parse("numeric_jitter:50:3") == PerturbationSpec(PerturbationKind.NUMERIC_JITTER, 50.0, 3)
    assert PerturbationSpec.parse("identity").kind is PerturbationKind.IDENTITY
    with pytest.raises(ValueError):
        PerturbationSpec.parse("shuffle_everything")
    with pytest.raises(ValueError):
        PerturbationSpec.parse("numeric_jitter:-1")


@pytest.mark.parametrize("kind", list(PerturbationKind))
def test_perturbations_are_deterministic(travel_contract, kind):
    spec = PerturbationSpec(kind, 25, 11)
    assert apply_perturbation(travel_contract, spec) == apply_perturbation(travel_contract, spec)


def test_rename_and_drop_change_conditions(travel_contract):
    renamed = apply_perturbation(travel_contract, PerturbationSpec("field_rename", 0, 1))
    assert "_renamed" in to_source(renamed.institutional.autonomous_if)
    dropped = apply_perturbation(travel_contract, PerturbationSpec("clause_drop", 0, 1))
    assert len(dropped.institutional.autonomous_if.operands) == 2


def test_rename_makes_hold_boundary(travel_contract, travel_case):
    e = travel_case.episode
    specs = [PerturbationSpec("field_rename", 0, s) for s in range(4)]
    assert envelope_stability(travel_contract, e, specs, 0.0) == 0.0
    with pytest.raises(ValueError):
        envelope_stability(travel_contract, e, [], 0.0)
