"""Small builders shared by the test modules."""

from __future__ import annotations

import random

from intentc.conditions import And, BoolLit, Compare, Expr, Ident, Not, Num, Or
from intentc.model import (
    Action,
    ContractTuple,
    EvidentiaryContract,
    InstitutionalContract,
    ProceduralContract,
    SemanticContract,
    TaskEpisode,
)

VARS = ("x", "y", "z")
FLAGS = ("b",)
CMP_OPS = ("<", "<=", ">", ">=", "==", "!=")


def simple_contract(auto: Expr, esc: Expr | None = None, **inst) -> ContractTuple:
    """Fully resolved contract whose only live clauses are the institutional conditions."""
    return ContractTuple(
        semantic=SemanticContract(entities=(), acceptance_criteria=(), ambiguity_policy={}),
        evidentiary=EvidentiaryContract(admissible_sources=(), conflict_resolution=()),
        procedural=ProceduralContract(
            workflow=("act",), allowed_tools=frozenset({"tool"}), step_of_op={"act": "act"}, rollback="undo"
        ),
        institutional=InstitutionalContract(
            autonomous_if=auto,
            escalate_if=BoolLit(False) if esc is None else esc,
            role_permissions={"agent": frozenset({"act"})},
            risk_of_op={},
            audit_retention_days=30,
            **inst,
        ),
    )


def grid_episode(rng: random.Random, size: int, missing_rate: float = 0.05) -> TaskEpisode:
    """Actions over a small integer grid; a few omit ``z`` or ``b`` so some predicates are Unknown."""
    actions = []
    for i in range(size):
        bindings = {v: rng.randint(0, 9) for v in VARS}
        bindings["b"] = rng.random() < 0.5
        for name in ("z", "b"):
            if rng.random() < missing_rate:
                del bindings[name]
        actions.append(Action("act", obj=f"p{i}", actor="agent", tool="tool", bindings=bindings))
    return TaskEpisode("grid", action_space=tuple(actions))


def random_atom(rng: random.Random) -> Expr:
    if rng.random() < 0.2:
        return Ident(rng.choice(FLAGS))
    return Compare(rng.choice(CMP_OPS), Ident(rng.choice(VARS)), Num(rng.randint(0, 9)))


def random_condition(rng: random.Random, depth: int = 2) -> Expr:
    if depth == 0 or rng.random() < 0.3:
        return random_atom(rng)
    kind = rng.choice(("and", "or", "not"))
    if kind == "not":
        return Not(random_condition(rng, depth - 1))
    parts = tuple(random_condition(rng, depth - 1) for _ in range(rng.randint(2, 3)))
    return And(parts) if kind == "and" else Or(parts)
