import pytest

from helpers import simple_contract

from intentc.bench import (
    BenchEpisode,
    ContractAware,
    NaiveExecutor,
    OracleContract,
    PerturbationError,
    RoutineStats,
    SearchBooster,
    SuiteError,
    builtin_corpus,
    classify_failure,
    internalization_gate,
    make_agent,
    perturb,
    run_episode,
    run_suite,
    wilson_lower,
)
from intentc.bench.harness import EpisodeOutcome, FailureLabel
from intentc.bench.suite import SuiteManifest, load_corpus, manifest_from_data
from intentc.conditions import parse_condition
from intentc.model import Action, EventType, TaskEpisode
from intentc.router import MoveKind


@pytest.fixture(scope="module")
def corpus():
    return {b.id: b for b in builtin_corpus()}


def test_corpus_covers_three_domains(corpus):
    assert len(corpus) == 6
    assert {b.domain for b in corpus.values()} == {"travel", "software_change", "support_compliance"}
    for b in corpus.values():
        assert b.expected_behavior is MoveKind.ACT
        assert b.first_best_inside()  # unperturbed top candidate is authorized


def test_institutional_perturbation_removes_top_op(corpus):
    b = corpus["travel-purchase-002"]
    top = b.candidate_actions()[0]
    p = perturb(b, "inst", 0)
    roles = p.contract.institutional.role_permissions[top.actor]
    assert top.op not in roles
    assert "draft_notification" in roles
    assert p.expected_behavior is MoveKind.ESCALATE
    assert not p.authorized(top)


def test_evidence_ageing_is_past_the_window(corpus):
    b = corpus["travel-purchase-002"]
    aged = [p for p in (perturb(b, "evid", s) for s in range(40)) if "aged" in p.perturbation.description]
    assert aged
    p = aged[0]
    assert "960s" in p.perturbation.description
    before = {r.id: r for r in b.base.evidence}
    (rec,) = [r for r in p.base.evidence if r != before[r.id]]
    assert b.now - rec.timestamp == 960
    assert p.contract == b.contract  # evidence changes, the contract does not


def test_perturbation_is_deterministic_and_single_shot(corpus):
    b = corpus["sw-patch-002"]
    for dim in ("sem", "evid", "proc", "inst"):
        assert perturb(b, dim, 3) == perturb(b, dim, 3)
        with pytest.raises(PerturbationError, match="already perturbed"):
            perturb(perturb(b, dim, 3), dim, 4)


def test_nothing_to_perturb():
    K = simple_contract(parse_condition("true"))
    a = Action("act", actor="agent", tool="tool", id="a")
    bare = BenchEpisode(TaskEpisode("bare", action_space=(a,)), K, ("a",))
    for dim in ("sem", "evid", "proc"):
        with pytest.raises(PerturbationError, match="nothing to perturb"):
            perturb(bare, dim, 0)
    assert not perturb(bare, "inst", 0).authorized(a)


def test_procedural_perturbation_swaps_tool(corpus):
    b = corpus["sup-refund-002"]
    p = perturb(b, "proc", 0)
    tools = p.contract.procedural.allowed_tools
    assert "payments_api" not in tools and "payments_dual_control" in tools


# Agents ------------------------------------------------------------------------


def test_make_agent():
    assert make_agent("SearchBooster(4)").k == 4
    assert isinstance(make_agent("OracleContract"), OracleContract)
    with pytest.raises(ValueError):
        make_agent("Telepath")


def test_naive_undersearches_and_booster_recovers(corpus):
    b = corpus["sw-patch-001"]
    assert classify_failure(run_episode(NaiveExecutor(), b)[1]) is FailureLabel.UNDERSEARCH
    trace, outcome = run_episode(SearchBooster(4), b)
    assert classify_failure(outcome) is FailureLabel.NONE and outcome.checker_pass


def test_contract_aware_escalates_under_institutional_change(corpus):
    p = perturb(corpus["travel-purchase-002"], "inst", 0)
    trace, outcome = run_episode(ContractAware(), p)
    assert MoveKind.ESCALATE in outcome.moves
    assert classify_failure(outcome) is FailureLabel.NONE
    assert any(ev.q is EventType.WAIT and ev.human_review for ev in trace.events)


def test_step_budget(corpus):
    trace, outcome = run_episode(SearchBooster(16), corpus["sw-patch-001"], budget=1)
    assert outcome.budget_exhausted and outcome.executed is None


def test_trace_times_are_contiguous(corpus):
    trace, _ = run_episode(ContractAware(), corpus["travel-hold-001"])
    for a, b in zip(trace.events, trace.events[1:]):
        assert a.f == b.s


# Classifier precedence -----------------------------------------------------------


def _outcome(**kw):
    return EpisodeOutcome("e", "agent", **kw)


def test_classifier_precedence():
    act = Action("send", id="s")
    bad_routine = RoutineStats("r", 500, 490, 500, 0.99, True, False)
    assert classify_failure(_outcome(routine=bad_routine, routine_eligible=False)) is FailureLabel.PREMATURE_INTERNALIZATION
    assert classify_failure(_outcome(envelope_empty=True, solvable=True)) is FailureLabel.CONTRACT_CONFLICT
    assert classify_failure(_outcome(executed=act, authorized=True, checker_pass=False)) is FailureLabel.UNDERSEARCH
    assert classify_failure(_outcome(executed=act, authorized=False, checker_pass=False,
                                     permitted_ops=frozenset({"draft"}))) is FailureLabel.MISDELEGATION
    assert classify_failure(_outcome(executed=act, authorized=False, checker_pass=True)) is FailureLabel.MISCLOSURE
    assert classify_failure(_outcome(executed=act, authorized=False, ratified=True, checker_pass=True)) is FailureLabel.NONE
    assert classify_failure(_outcome(escalated=True, first_best_inside=True)) is FailureLabel.OVERCLOSURE
    assert classify_failure(_outcome(budget_exhausted=True, authorized_candidate_available=True)) is FailureLabel.UNDERSEARCH
    assert classify_failure(_outcome()) is FailureLabel.NONE


# Gate --------------------------------------------------------------------------


def test_gate_validation():
    with pytest.raises(ValueError):
        RoutineStats("r", 10, 11, 10, 0.9, True, True)
    with pytest.raises(ValueError):
        RoutineStats("r", 10, 5, 10, 1.5, True, True)
    with pytest.raises(ValueError):
        wilson_lower(0, 0)


def test_gate_reports_every_failing_criterion():
    v = internalization_gate(RoutineStats("r", 1, 1, 2, 0.5, False, False))
    assert v.failing == ("frequency", "compliance", "stability", "monitorable", "rollback")


def test_wilson_is_monotone_in_successes():
    bounds = [wilson_lower(s, 50) for s in range(51)]
    assert bounds == sorted(bounds) and bounds[0] == 0.0


# Suite -------------------------------------------------------------------------


def test_manifest_validation(tmp_path):
    with pytest.raises(SuiteError, match="unknown dimension"):
        manifest_from_data({"dimensions": ["vibes"]})
    with pytest.raises(SuiteError, match="unknown manifest keys"):
        manifest_from_data({"colour": 1})
    with pytest.raises(SuiteError):
        manifest_from_data({"seeds": []})


def test_duplicate_ids_rejected():
    with pytest.raises(SuiteError, match="duplicate"):
        load_corpus(SuiteManifest(corpus=("builtin", "builtin")))


def test_small_suite_shape():
    report = run_suite(SuiteManifest(dimensions=("none", "inst"), agents=("NaiveExecutor", "ContractAware")))
    cells = {(c["agent"], c["dimension"]): c for c in report["cells"]}
    assert set(cells) == {("ContractAware", "inst"), ("ContractAware", "none"),
                          ("NaiveExecutor", "inst"), ("NaiveExecutor", "none")}
    assert cells[("NaiveExecutor", "inst")]["labels"]["misdelegation"] == 6
    assert cells[("ContractAware", "inst")]["labels"]["none"] == 6
    assert sum(cells[("ContractAware", "none")]["labels"].values()) == 6
