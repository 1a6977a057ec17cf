"""Benchmark episodes, corpus files and single-contract perturbations.

A corpus file (``.bench``) holds one domain: the intent document, authored
semantic variants, sanctioned alternative tools, and a list of episodes in
case-file form plus a ranked ``candidates`` list and optional ``quality``
verdicts from the task-level checker (e.g. hidden tests).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from intentc.casefile import episode_from_data
from intentc.conditions import Expr
from intentc.config import DEFAULT_CONFIG, Config
from intentc.document import compile_contracts, compile_criterion, load_strict_yaml, parse_intent_document
from intentc.envelope import is_inside, membership
from intentc.model import Action, ContractTuple, Dimension, TaskEpisode, action_bindings
from intentc.predicates import TruthValue, all_of, eval_expr
from intentc.router import MoveKind

EXPECTED_BEHAVIOR = {
    None: MoveKind.ACT,
    Dimension.SEM: MoveKind.ASK,
    Dimension.EVID: MoveKind.RETRIEVE,
    Dimension.PROC: MoveKind.SIMULATE,
    Dimension.INST: MoveKind.ESCALATE,
}


class PerturbationError(ValueError):
    pass


@dataclass(frozen=True)
class Perturbation:
    dimension: Dimension
    seed: int
    description: str


@dataclass(frozen=True)
class BenchEpisode:
    base: TaskEpisode
    contract: ContractTuple
    candidates: tuple[str, ...]
    domain: str = ""
    now: float = 0.0
    perturbation: Perturbation | None = None
    expected_behavior: MoveKind = MoveKind.ACT
    # Contract the competence checker sees; perturbations leave it untouched.
    surface_contract: ContractTuple | None = None
    quality: Mapping[str, bool] = field(default_factory=dict)
    semantic_variants: tuple[tuple[Expr, ...], ...] = ()
    alternative_tools: Mapping[str, str] = field(default_factory=dict)
    solvable: bool = False
    rater_labels: tuple[tuple[bool, ...], ...] | None = None

    @property
    def id(self) -> str:
        return self.base.id

    def candidate_actions(self) -> list[Action]:
        return [self.base.find_action(key) for key in self.candidates]

    def checker(self, a: Action) -> bool:
        """Task-level competence check: surface acceptance criteria plus recorded quality."""
        if self.quality.get(a.key, True) is False:
            return False
        surface = self.surface_contract or self.contract
        bindings = action_bindings(a, self.base)
        criteria = surface.semantic.acceptance_criteria or ()
        return all_of(eval_expr(c, bindings) for c in criteria) is TruthValue.TRUE

    def authorized(self, a: Action, episode: TaskEpisode | None = None, now: float | None = None, config: Config = DEFAULT_CONFIG) -> bool:
        """Ratification oracle: inside the envelope of the ground-truth contract."""
        return is_inside(a, episode or self.base, self.contract, self.now if now is None else now, config)

    def requires_escalation(self, config: Config = DEFAULT_CONFIG) -> bool:
        if self.base.requires_escalation is not None:
            return self.base.requires_escalation
        actions = self.candidate_actions()
        if any(self.authorized(a, config=config) for a in actions):
            return False
        return any(
            membership(a, self.base, self.contract, self.now, config).per_dim[Dimension.INST].value is TruthValue.FALSE
            for a in actions
        )

    def first_best_inside(self, config: Config = DEFAULT_CONFIG) -> bool:
        return bool(self.candidates) and self.authorized(self.candidate_actions()[0], config=config)


# Loading ------------------------------------------------------------------------


def bench_episodes_from_data(data: Mapping[str, Any], profiles=None, config: Config = DEFAULT_CONFIG) -> list[BenchEpisode]:
    domain = str(data.get("domain", ""))
    doc = parse_intent_document(data["intent"])
    K = compile_contracts(doc, profiles=profiles, config=config)
    variants = tuple(
        tuple(compile_criterion(text, f"semantic_variants[{i}]") for text in row)
        for i, row in enumerate(data.get("semantic_variants") or ())
    )
    alternatives = dict(data.get("alternative_tools") or {})
    out = []
    for item in data.get("episodes") or ():
        base = episode_from_data(item)
        candidates = tuple(item.get("candidates") or (a.key for a in base.action_space))
        for key in candidates:
            base.find_action(key)
        raters = item.get("rater_labels")
        out.append(
            BenchEpisode(
                base=base,
                contract=K,
                candidates=candidates,
                domain=domain,
                now=item.get("now", 0),
                surface_contract=K,
                quality={str(k): bool(v) for k, v in (item.get("quality") or {}).items()},
                semantic_variants=variants,
                alternative_tools=alternatives,
                solvable=bool(item.get("solvable", False)),
                rater_labels=None if raters is None else tuple(tuple(bool(x) for x in row) for row in raters),
            )
        )
    return out


def load_bench_file(path: str | Path, **kwargs) -> list[BenchEpisode]:
    return bench_episodes_from_data(load_strict_yaml(Path(path).read_text(encoding="utf-8")), **kwargs)


BUILTIN_DOMAINS = ("travel", "software_change", "support_compliance")


def builtin_corpus(domains=BUILTIN_DOMAINS, **kwargs) -> list[BenchEpisode]:
    out = []
    root = resources.files("intentc.bench") / "data"
    for name in domains:
        text = (root / f"{name}.bench").read_text(encoding="utf-8")
        out.extend(bench_episodes_from_data(load_strict_yaml(text), **kwargs))
    return out


# Perturbations --------------------------------------------------------------------


def _rng(e: BenchEpisode, dim: Dimension, seed: int) -> random.Random:
    return random.Random(f"{e.id}|{dim.value}|{seed}")


def _perturb_semantic(e: BenchEpisode, rng: random.Random) -> tuple[BenchEpisode, str]:
    current = e.contract.semantic.acceptance_criteria
    variants = [v for v in e.semantic_variants if v != current]
    if not variants:
        raise PerturbationError("nothing to perturb: no semantic variants")
    i = rng.randrange(len(variants))
    K = replace(e.contract, semantic=replace(e.contract.semantic, acceptance_criteria=variants[i]))
    return replace(e, contract=K), f"acceptance criteria replaced by authored variant {i}"


def _perturb_evidentiary(e: BenchEpisode, rng: random.Random) -> tuple[BenchEpisode, str]:
    actions = e.candidate_actions()
    records = e.base.evidence_by_id()
    shared = set(actions[0].citations) if actions else set()
    for a in actions[1:]:
        shared &= set(a.citations)
    options = []
    for rid in sorted(shared):
        rec = records.get(rid)
        rule = None if rec is None else e.contract.evidentiary.rule_for(rec.source_class)
        if rule is None:
            continue
        if rule.max_age_seconds is not None:
            options.append((rid, "age"))
        if rule.provenance_required and rec.provenance:
            options.append((rid, "strip_provenance"))
        options.append((rid, "disallow"))
    if not options:
        raise PerturbationError("nothing to perturb: no admissible citation shared by the candidates")
    rid, mode = options[rng.randrange(len(options))]
    rec = records[rid]
    if mode == "age":
        rule = e.contract.evidentiary.rule_for(rec.source_class)
        new = replace(rec, timestamp=e.now - (rule.max_age_seconds + 60))
        what = f"aged {rid} to {rule.max_age_seconds + 60:g}s"
    elif mode == "strip_provenance":
        new = replace(rec, provenance=None)
        what = f"stripped provenance from {rid}"
    else:
        new = replace(rec, admissible_flag=False)
        what = f"policy-disallowed {rid}"
    evidence = tuple(new if r.id == rid else r for r in e.base.evidence)
    return replace(e, base=replace(e.base, evidence=evidence)), what


def _perturb_procedural(e: BenchEpisode, rng: random.Random) -> tuple[BenchEpisode, str]:
    proc = e.contract.procedural
    actions = e.candidate_actions()
    tools = proc.allowed_tools or frozenset()
    canonical = [a.tool for a in actions if a.tool in tools and a.tool in e.alternative_tools]
    if not canonical:
        raise PerturbationError("nothing to perturb: no canonical tool with a sanctioned alternative")
    tool = canonical[0]
    alternative = e.alternative_tools[tool]
    K = replace(e.contract, procedural=replace(proc, allowed_tools=(tools - {tool}) | {alternative}))
    return replace(e, contract=K), f"disallowed {tool}; sanctioned {alternative}"


def _perturb_institutional(e: BenchEpisode, rng: random.Random) -> tuple[BenchEpisode, str]:
    inst = e.contract.institutional
    actions = e.candidate_actions()
    roles = dict(inst.role_permissions or {})
    if not actions or actions[0].actor not in roles or actions[0].op not in roles[actions[0].actor]:
        raise PerturbationError("nothing to perturb: top candidate's operation is not role-permitted")
    actor, op = actions[0].actor, actions[0].op
    roles[actor] = roles[actor] - {op}
    K = replace(e.contract, institutional=replace(inst, role_permissions=roles))
    kept = ", ".join(sorted(roles[actor])) or "nothing"
    return replace(e, contract=K), f"{actor} may no longer {op}; still permitted: {kept}"


_PERTURBERS = {
    Dimension.SEM: _perturb_semantic,
    Dimension.EVID: _perturb_evidentiary,
    Dimension.PROC: _perturb_procedural,
    Dimension.INST: _perturb_institutional,
}


def perturb(e: BenchEpisode, dim: Dimension | str, seed: int) -> BenchEpisode:
    """Alter exactly one contract dimension (or, for evidence, the cited records).

    Deterministic in (episode id, dimension, seed). The surface contract used
    by the competence checker is left unchanged.
    """
    if e.perturbation is not None:
        raise PerturbationError(f"episode {e.id} is already perturbed")
    dim = Dimension(dim)
    out, description = _PERTURBERS[dim](e, _rng(e, dim, seed))
    return replace(
        out,
        perturbation=Perturbation(dim, seed, description),
        expected_behavior=EXPECTED_BEHAVIOR[dim],
    )
