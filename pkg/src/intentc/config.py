"""Tunable constants for evaluation, routing and metrics.

Values can be overridden from a YAML/JSON file, either passed explicitly or
named by the ``INTENTC_CONFIG`` environment variable::

    p_unknown: {sem: 0.4}
    thresholds: {inst: 0.2}
    kappa: 0.25
    beta: 0.05
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from intentc.model import DIMENSIONS, Dimension, RiskLevel

ENV_VAR = "INTENTC_CONFIG"


def _per_dim(value: float) -> dict[Dimension, float]:
    return {dim: value for dim in DIMENSIONS}


@dataclass(frozen=True)
class Config:
    p_unknown: Mapping[Dimension, float] = field(default_factory=lambda: _per_dim(0.5))
    beta: float = 0.05
    risk_scores: Mapping[RiskLevel, float] = field(
        default_factory=lambda: {
            RiskLevel.LOW: 0.25,
            RiskLevel.MEDIUM: 0.5,
            RiskLevel.HIGH: 0.75,
            RiskLevel.CRITICAL: 1.0,
        }
    )
    default_risk: RiskLevel = RiskLevel.HIGH
    alpha_map: Mapping[RiskLevel, float] = field(
        default_factory=lambda: {
            RiskLevel.LOW: 0.6,
            RiskLevel.MEDIUM: 0.8,
            RiskLevel.HIGH: 0.95,
            RiskLevel.CRITICAL: 0.99,
        }
    )
    kappa: float = 0.25
    thresholds: Mapping[Dimension, float] = field(default_factory=lambda: _per_dim(0.3))
    unit_cost: Mapping[Dimension, float] = field(
        default_factory=lambda: {
            Dimension.SEM: 60.0,
            Dimension.EVID: 30.0,
            Dimension.PROC: 45.0,
            Dimension.INST: 300.0,
        }
    )
    rollback_bound: float = 60.0
    step_budget: int = 32

    def __post_init__(self) -> None:
        for dim, p in self.p_unknown.items():
            if not 0.0 < p < 1.0:
                raise ValueError(f"p_unknown.{dim.value} must lie in (0, 1), got {p}")
        for dim, theta in self.thresholds.items():
            if not 0.0 <= theta <= 1.0:
                raise ValueError(f"thresholds.{dim.value} must lie in [0, 1], got {theta}")
        scores = [self.risk_scores[level] for level in RiskLevel]
        if any(b <= a for a, b in zip(scores, scores[1:])):
            raise ValueError("risk_scores must be strictly increasing from low to critical")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


_DIM_KEYS = {"p_unknown", "thresholds", "unit_cost"}
_RISK_KEYS = {"risk_scores", "alpha_map"}


def config_from_mapping(data: Mapping[str, Any], base: Config | None = None) -> Config:
    base = base or Config()
    known = {f.name for f in fields(Config)}
    updates: dict[str, Any] = {}
    for key, value in data.items():
        if key not in known:
            raise ValueError(f"unknown configuration key {key!r}")
        if key in _DIM_KEYS:
            merged = dict(getattr(base, key))
            merged.update({Dimension(k): float(v) for k, v in value.items()})
            updates[key] = merged
        elif key in _RISK_KEYS:
            merged = dict(getattr(base, key))
            merged.update({RiskLevel(k): float(v) for k, v in value.items()})
            updates[key] = merged
        elif key == "default_risk":
            updates[key] = RiskLevel(value)
        elif key == "step_budget":
            updates[key] = int(value)
        else:
            updates[key] = float(value)
    return replace(base, **updates)


def load_config(path: str | os.PathLike | None = None) -> Config:
    """Load configuration from ``path``, else from ``$INTENTC_CONFIG``, else defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if not path:
        return Config()
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, Mapping):
        raise ValueError(f"{path}: configuration must be a mapping")
    return config_from_mapping(data)


DEFAULT_CONFIG = Config()
