"""Suite manifests and the stratified (agent x perturbation) report.

Manifest (YAML)::

    corpus: [builtin]            # or .bench paths relative to the manifest
    dimensions: [none, sem, evid, proc, inst]
    agents: [NaiveExecutor, SearchBooster(1), SearchBooster(4), ContractAware, OracleContract]
    seeds: [0, 1]
    step_budget: 32              # optional
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

from intentc.bench.agents import make_agent
from intentc.bench.corpus import BenchEpisode, PerturbationError, builtin_corpus, load_bench_file, perturb
from intentc.bench.harness import FailureLabel, classify_failure, run_episode
from intentc.config import DEFAULT_CONFIG, Config
from intentc.document import load_strict_yaml
from intentc.metrics import OracleAnnotations, metrics_report
from intentc.model import DIMENSIONS, EventTrace

UNPERTURBED = "none"
DEFAULT_AGENTS = ("NaiveExecutor", "SearchBooster(1)", "SearchBooster(4)", "SearchBooster(16)", "ContractAware", "OracleContract")


class SuiteError(ValueError):
    pass


@dataclass(frozen=True)
class SuiteManifest:
    corpus: tuple[str, ...] = ("builtin",)
    dimensions: tuple[str, ...] = (UNPERTURBED,) + tuple(d.value for d in DIMENSIONS)
    agents: tuple[str, ...] = DEFAULT_AGENTS
    seeds: tuple[int, ...] = (0,)
    step_budget: int | None = None
    base_dir: str = "."

    def __post_init__(self) -> None:
        valid = {UNPERTURBED} | {d.value for d in DIMENSIONS}
        for dim in self.dimensions:
            if dim not in valid:
                raise SuiteError(f"unknown dimension {dim!r}")
        if not self.agents or not self.seeds or not self.corpus:
            raise SuiteError("manifest needs at least one corpus entry, agent and seed")
        for spec in self.agents:
            make_agent(spec)

    def to_dict(self) -> dict[str, Any]:
        return {
            "corpus": list(self.corpus),
            "dimensions": list(self.dimensions),
            "agents": list(self.agents),
            "seeds": list(self.seeds),
            "step_budget": self.step_budget,
        }


def manifest_from_data(data: Mapping[str, Any], base_dir: str = ".") -> SuiteManifest:
    unknown = set(data) - {"corpus", "dimensions", "agents", "seeds", "step_budget"}
    if unknown:
        raise SuiteError(f"unknown manifest keys {sorted(unknown)}")
    kwargs: dict[str, Any] = {"base_dir": base_dir}
    for key in ("corpus", "dimensions", "agents"):
        if key in data:
            kwargs[key] = tuple(str(x) for x in data[key])
    if "seeds" in data:
        kwargs["seeds"] = tuple(int(x) for x in data["seeds"])
    if data.get("step_budget") is not None:
        kwargs["step_budget"] = int(data["step_budget"])
    return SuiteManifest(**kwargs)


def load_manifest(path: str | Path) -> SuiteManifest:
    path = Path(path)
    return manifest_from_data(load_strict_yaml(path.read_text(encoding="utf-8")) or {}, str(path.parent))


def load_corpus(manifest: SuiteManifest, config: Config = DEFAULT_CONFIG) -> list[BenchEpisode]:
    episodes: list[BenchEpisode] = []
    for entry in manifest.corpus:
        if entry == "builtin":
            episodes.extend(builtin_corpus(config=config))
        else:
            episodes.extend(load_bench_file(Path(manifest.base_dir) / entry, config=config))
    ids = [e.id for e in episodes]
    if len(set(ids)) != len(ids):
        raise SuiteError("duplicate episode ids in corpus")
    return episodes


def _instance(e: BenchEpisode, dim: str, seed: int) -> BenchEpisode:
    out = e if dim == UNPERTURBED else perturb(e, dim, seed)
    new_id = e.id if dim == UNPERTURBED else f"{e.id}|{dim}|{seed}"
    history = EventTrace(new_id, e.base.trace.events)
    return replace(out, base=replace(out.base, id=new_id, history=history))


def instances(episodes: list[BenchEpisode], dim: str, seeds) -> tuple[list[BenchEpisode], list[str]]:
    """Perturbed instances for one dimension, plus the ids that had nothing to perturb."""
    out, skipped = [], []
    for e in episodes:
        for seed in (seeds if dim != UNPERTURBED else seeds[:1]):
            try:
                out.append(_instance(e, dim, seed))
            except PerturbationError:
                skipped.append(f"{e.id}|{dim}|{seed}")
    return out, skipped


def _outcome_record(o, label: FailureLabel) -> dict[str, Any]:
    return {
        "episode": o.episode_id,
        "label": label.value,
        "moves": [m.value for m in o.moves],
        "executed": None if o.executed is None else o.executed.key,
        "authorized": o.authorized,
        "checker_pass": o.checker_pass,
        "escalated": o.escalated,
        "budget_exhausted": o.budget_exhausted,
    }


def run_cell(agent_spec: str, dim: str, benches: list[BenchEpisode], config: Config, budget: int | None) -> dict[str, Any]:
    if not benches:
        raise SuiteError(f"empty cell ({agent_spec}, {dim})")
    agent = make_agent(agent_spec)
    traces, notes, outcomes = [], {}, []
    for b in sorted(benches, key=lambda b: b.id):
        trace, o = run_episode(agent, b, config, budget)
        label = classify_failure(o)
        traces.append(trace)
        outcomes.append((o, label))
        notes[b.id] = OracleAnnotations(
            requires_escalation=b.requires_escalation(config),
            authorized={} if o.executed is None else {o.executed.key: bool(o.authorized or o.ratified)},
            first_best_inside_envelope=o.first_best_inside,
            rater_labels=b.rater_labels,
        )
    contracts = {b.id: b.contract for b in benches}
    episodes = {b.id: b.base for b in benches}
    report = metrics_report(traces, notes, contracts, episodes, config=config)
    labels = Counter(label.value for _, label in outcomes)
    routed = [o for o, _ in outcomes if o.first_move is not None]
    matches = sum(o.first_move is o.expected_behavior for o in routed)
    return {
        "agent": agent.name,
        "dimension": dim,
        "episodes": len(benches),
        "metrics": report.to_dict(),
        "labels": {label.value: labels.get(label.value, 0) for label in FailureLabel},
        "expected_behavior_match": None if not routed else matches / len(routed),
        "outcomes": [_outcome_record(o, label) for o, label in outcomes],
    }


def run_suite(manifest: SuiteManifest, config: Config = DEFAULT_CONFIG) -> dict[str, Any]:
    """Run every (agent, dimension) cell; the result is deterministic in the manifest."""
    corpus = load_corpus(manifest, config)
    cells, skipped = [], []
    for dim in manifest.dimensions:
        benches, missing = instances(corpus, dim, manifest.seeds)
        skipped.extend(missing)
        for spec in manifest.agents:
            cells.append(run_cell(spec, dim, benches, config, manifest.step_budget))
    cells.sort(key=lambda c: (c["agent"], c["dimension"]))
    return {"manifest": manifest.to_dict(), "cells": cells, "skipped": sorted(skipped)}


def report_json(report: Mapping[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
