"""Intent compilation into four inspectable contracts and a delegation envelope.

Typical use::

    from intentc import compile_text, membership
    K = compile_text(open("travel.intent").read())
    decision = membership(action, episode, K, now=0.0)
"""

from intentc.conditions import ConditionSyntaxError, parse_condition, to_source
from intentc.config import DEFAULT_CONFIG, Config, load_config
from intentc.document import (
    CompileError,
    IntentDocument,
    IntentDocumentError,
    compile_contracts,
    compile_text,
    parse_intent_document,
    serialize_intent_document,
)
from intentc.envelope import (
    Band,
    EnvelopeDecision,
    PerturbationSpec,
    ProbabilisticDecision,
    SequenceVerdict,
    Verdict,
    check_tightening,
    envelope_size,
    envelope_stability,
    is_inside,
    membership,
    prob_membership,
    sequence_membership,
)
from intentc.metrics import MetricsReport, OracleAnnotations, accounting_weights, metrics_report, time_to_authorized
from intentc.model import (
    Action,
    ContractTuple,
    Dimension,
    Event,
    EventTrace,
    EventType,
    EvidenceRecord,
    ReviewOutcome,
    RiskLevel,
    TaskEpisode,
    validate_episode,
)
from intentc.predicates import EvaluationError, PredicateResult, TruthValue, eval_dimension
from intentc.router import ClosureGaps, Move, MoveKind, ProxySignals, estimate_gaps, route

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Band",
    "ClosureGaps",
    "CompileError",
    "ConditionSyntaxError",
    "Config",
    "ContractTuple",
    "DEFAULT_CONFIG",
    "Dimension",
    "EnvelopeDecision",
    "EvaluationError",
    "Event",
    "EventTrace",
    "EventType",
    "EvidenceRecord",
    "IntentDocument",
    "IntentDocumentError",
    "MetricsReport",
    "Move",
    "MoveKind",
    "OracleAnnotations",
    "PerturbationSpec",
    "PredicateResult",
    "ProbabilisticDecision",
    "ProxySignals",
    "ReviewOutcome",
    "RiskLevel",
    "SequenceVerdict",
    "TaskEpisode",
    "TruthValue",
    "Verdict",
    "accounting_weights",
    "check_tightening",
    "compile_contracts",
    "compile_text",
    "envelope_size",
    "envelope_stability",
    "estimate_gaps",
    "eval_dimension",
    "is_inside",
    "load_config",
    "membership",
    "metrics_report",
    "parse_condition",
    "parse_intent_document",
    "prob_membership",
    "route",
    "sequence_membership",
    "serialize_intent_document",
    "time_to_authorized",
    "to_source",
    "validate_episode",
]
