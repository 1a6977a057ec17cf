"""Controlled-internalization gate for recurrent routines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

CRITERIA = ("frequency", "compliance", "stability", "monitorable", "rollback")


@dataclass(frozen=True)
class RoutineStats:
    routine_id: str
    frequency: int
    compliance_successes: int
    compliance_trials: int
    stability: float
    monitorable: bool
    rollback_defined: bool

    def __post_init__(self) -> None:
        if not 0 <= self.compliance_successes <= self.compliance_trials:
            raise ValueError("compliance successes must lie in [0, trials]")
        if not 0.0 <= self.stability <= 1.0:
            raise ValueError("stability must lie in [0, 1]")


@dataclass(frozen=True)
class GateThresholds:
    min_frequency: int = 100
    min_compliance: float = 0.9
    min_stability: float = 0.95
    confidence: float = 0.95


@dataclass(frozen=True)
class GateVerdict:
    eligible: bool
    failing: tuple[str, ...]
    compliance_lower: float


def wilson_lower(successes: int, trials: int, confidence: float = 0.95) -> float:
    """Lower end of the Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("compliance trials must be positive")
    if successes == 0:
        return 0.0  # centre and spread cancel exactly; avoid float residue
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    n, p = trials, successes / trials
    centre = p + z * z / (2 * n)
    spread = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return (centre - spread) / (1 + z * z / n)


def internalization_gate(stats: RoutineStats, thresholds: GateThresholds = GateThresholds()) -> GateVerdict:
    lower = wilson_lower(stats.compliance_successes, stats.compliance_trials, thresholds.confidence)
    checks = {
        "frequency": stats.frequency >= thresholds.min_frequency,
        "compliance": lower >= thresholds.min_compliance,
        "stability": stats.stability >= thresholds.min_stability,
        "monitorable": stats.monitorable,
        "rollback": stats.rollback_defined,
    }
    failing = tuple(name for name in CRITERIA if not checks[name])
    return GateVerdict(not failing, failing, lower)
