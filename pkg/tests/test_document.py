import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentc.config import DEFAULT_CONFIG
from intentc.document import (
    REQUIRED_FIELDS,
    CompileError,
    IntentDocumentError,
    compile_alpha_map,
    compile_contracts,
    compile_source_rule,
    compile_text,
    load_strict_yaml,
    parse_intent_document,
    serialize_intent_document,
)
from intentc.model import Dimension, RiskLevel, SourceRule

TASK = "task:\n  objective: demo\n"


def test_travel_document_compiles_fully_with_profile(travel_contract):
    assert all(not travel_contract.unresolved[d] for d in Dimension)
    inst = travel_contract.institutional
    assert inst.audit_retention_days == 365
    assert inst.risk_of_op["purchase_ticket"] is RiskLevel.HIGH
    assert "purchase_ticket" not in inst.role_permissions["travel_agent"]
    assert travel_contract.evidentiary.conflict_resolution == ("policy", "preference")
    assert any("supplied by profile" in n for n in travel_contract.notes)


def test_travel_source_rules(travel_contract):
    rules = {r.source_class: r for r in travel_contract.evidentiary.admissible_sources}
    assert rules["airline_inventory_api"].max_age_seconds == 900
    assert rules["corporate_travel_policy"].version_match
    assert rules["corporate_travel_policy"].provenance_required
    assert rules["current_booking_record"] == SourceRule("current_booking_record")


def test_without_profile_fields_stay_unresolved(travel_text):
    K = compile_contracts(parse_intent_document(travel_text), profiles={})
    assert K.unresolved[Dimension.PROC] == ("allowed_tools",)
    assert set(K.unresolved[Dimension.INST]) == {"role_permissions", "risk_of_op"}


def test_missing_section_leaves_every_required_field_open():
    K = compile_text(TASK)
    for dim in Dimension:
        assert K.unresolved[dim] == REQUIRED_FIELDS[dim]
    assert len(K.unresolved[Dimension.INST]) == 5


def test_missing_task_is_an_error():
    with pytest.raises(IntentDocumentError, match="missing task"):
        parse_intent_document("semantic_contract: {}\n")


def test_unknown_keys_are_preserved_as_diagnostics():
    doc = parse_intent_document(TASK + "semantic_contract:\n  mood: calm\nextras: 1\n")
    assert "semantic_contract: unknown key mood" in doc.diagnostics
    assert doc.extra == {"extras": 1}


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("a: &x 1\nb: *x\n", "anchors"),
        ("a: !!python/object 1\n", "tag"),
        ("a: 1\n---\nb: 2\n", "multiple documents"),
        ("a: [1, 2\n", "syntax error"),
        ("a: .nan\n", "non-finite"),
    ],
)
def test_strict_yaml_rejections(text, fragment):
    with pytest.raises(IntentDocumentError, match=fragment):
        load_strict_yaml(text)


def test_syntax_error_carries_line():
    with pytest.raises(IntentDocumentError) as info:
        load_strict_yaml("a: 1\nb: [\n")
    assert info.value.line is not None


@pytest.mark.parametrize(
    "spec, want",
    [
        ("api:<15min", SourceRule("api", 900.0)),
        ("api:<2h", SourceRule("api", 7200.0)),
        ("api?:provenance", SourceRule("api", None, True, False, False)),
        ({"source_class": "x", "max_age_seconds": 30}, SourceRule("x", 30.0)),
    ],
)
def test_source_rules(spec, want):
    assert compile_source_rule(spec, "here") == want


@pytest.mark.parametrize("spec", ["api:sometimes", "", {"source_class": "x", "max_age_seconds": -1}, 7])
def test_bad_source_rules(spec):
    with pytest.raises(CompileError):
        compile_source_rule(spec, "here")


def test_alpha_map_defaults_and_clamping():
    defaults = DEFAULT_CONFIG.alpha_map
    assert compile_alpha_map(None, defaults) == dict(defaults)
    filled = compile_alpha_map({"low": 0.9}, defaults)
    assert filled[RiskLevel.LOW] == 0.9 and filled[RiskLevel.MEDIUM] == 0.9
    with pytest.raises(CompileError, match="nondecreasing"):
        compile_alpha_map({"low": 0.9, "high": 0.5}, defaults)
    with pytest.raises(CompileError):
        compile_alpha_map({"extreme": 0.5}, defaults)


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from([r.value for r in RiskLevel]), st.floats(0, 1), max_size=4))
def test_alpha_map_is_monotone_whenever_accepted(declared):
    try:
        out = compile_alpha_map(declared, DEFAULT_CONFIG.alpha_map)
    except CompileError:
        return
    values = [out[level] for level in RiskLevel]
    assert values == sorted(values)
    for key, value in declared.items():
        assert out[RiskLevel(key)] == value


@pytest.mark.parametrize(
    "body",
    [
        "procedural_contract:\n  workflow: [a, a]\n",
        "procedural_contract:\n  workflow: [a]\n  step_of_op: {x: b}\n",
        "institutional_contract:\n  autonomous_if: 'a <'\n",
        "institutional_contract:\n  risk_of_op: {x: extreme}\n",
        "semantic_contract:\n  ambiguity_policy: {x: guess}\n",
        "institutional_contract:\n  audit_retention_days: -1\n",
    ],
)
def test_compile_errors(body):
    with pytest.raises((CompileError, ValueError)):
        compile_text(TASK + body)


def test_prose_acceptance_criterion_becomes_an_identifier(travel_contract):
    from intentc.conditions import identifiers

    names = [identifiers(c)[0] for c in travel_contract.semantic.acceptance_criteria]
    assert names == ["arrival_before_meeting_start_time", "same_cabin_unless_approved"]


def test_document_round_trip(travel_text):
    doc = parse_intent_document(travel_text)
    again = parse_intent_document(serialize_intent_document(doc))
    assert again == doc
    assert compile_contracts(again) == compile_contracts(doc)
