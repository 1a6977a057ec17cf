"""Misclosure benchmark: perturbed episodes, scripted agents, failure labels."""

from intentc.bench.agents import ContractAware, NaiveExecutor, OracleContract, SearchBooster, make_agent
from intentc.bench.corpus import (
    EXPECTED_BEHAVIOR,
    BenchEpisode,
    Perturbation,
    PerturbationError,
    builtin_corpus,
    load_bench_file,
    perturb,
)
from intentc.bench.harness import EpisodeOutcome, EpisodeSession, FailureLabel, classify_failure, run_episode
from intentc.bench.internalization import GateThresholds, GateVerdict, RoutineStats, internalization_gate, wilson_lower
from intentc.bench.suite import SuiteError, SuiteManifest, load_manifest, report_json, run_suite

__all__ = [
    "EXPECTED_BEHAVIOR",
    "BenchEpisode",
    "ContractAware",
    "EpisodeOutcome",
    "EpisodeSession",
    "FailureLabel",
    "GateThresholds",
    "GateVerdict",
    "NaiveExecutor",
    "OracleContract",
    "Perturbation",
    "PerturbationError",
    "RoutineStats",
    "SearchBooster",
    "SuiteError",
    "SuiteManifest",
    "builtin_corpus",
    "classify_failure",
    "internalization_gate",
    "load_bench_file",
    "load_manifest",
    "make_agent",
    "perturb",
    "report_json",
    "run_episode",
    "run_suite",
    "wilson_lower",
]
