"""Scripted agent policies.

Candidate generation is the ranked list stored with each episode; "more
search" means consuming more of that list.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from intentc.bench.harness import EpisodeSession
from intentc.bench.internalization import RoutineStats
from intentc.router import ClosureGaps, MoveKind, ProxySignals, estimate_gaps, route


@dataclass(frozen=True)
class NaiveExecutor:
    """Always executes its best-ranked candidate."""

    routine: RoutineStats | None = None

    @property
    def name(self) -> str:
        return "NaiveExecutor"

    def run(self, session: EpisodeSession) -> None:
        if not session.candidates:
            return
        a, _ = session.sample(0)
        session.record(MoveKind.ACT)
        session.execute(a)


@dataclass(frozen=True)
class SearchBooster:
    """Samples up to k candidates against the checker, then executes.

    Executes the first candidate that passes, or the top-ranked one if none do.
    """

    k: int = 4
    routine: RoutineStats | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")

    @property
    def name(self) -> str:
        return f"SearchBooster({self.k})"

    def run(self, session: EpisodeSession) -> None:
        if not session.candidates:
            return
        chosen = None
        for i in range(min(self.k, len(session.candidates))):
            a, ok = session.sample(i)
            if i == 0:
                chosen = a
            if ok:
                chosen = a
                break
            session.record(MoveKind.SEARCH)
        session.record(MoveKind.ACT)
        session.execute(chosen)


@dataclass(frozen=True)
class ContractAware:
    """Follows route(): compiles, estimates gaps, executes only on act."""

    routine: RoutineStats | None = None

    @property
    def name(self) -> str:
        return "ContractAware"

    def gaps(self, session: EpisodeSession, K, a) -> ClosureGaps:
        signals = ProxySignals(retry_depth=session.retries)
        return estimate_gaps(session.episode_now(), K, signals, a, session.clock, session.config)

    def run(self, session: EpisodeSession) -> None:
        K = session.compile()
        for i in range(len(session.candidates)):
            a, ok = session.sample(i)
            move = route(self.gaps(session, K, a), session.decide(a, K), ok, session.config.thresholds, K)
            session.record(move)
            if move.kind is MoveKind.ACT:
                session.execute(a)
                return
            if move.kind is MoveKind.SEARCH:
                session.retries += 1
                continue
            if move.kind is MoveKind.ESCALATE:
                approved = session.escalate(a, move.reason)
                if approved is not None:
                    session.execute(approved, ratified=True)
                return
            session.perform(move, a)
            return
        session.record(MoveKind.ABSTAIN)


@dataclass(frozen=True)
class OracleContract(ContractAware):
    """ContractAware with the ground-truth contract and exact (zero) closure gaps."""

    @property
    def name(self) -> str:
        return "OracleContract"

    def gaps(self, session: EpisodeSession, K, a) -> ClosureGaps:
        return ClosureGaps()


_AGENT_RE = re.compile(r"^\s*(\w+)\s*(?:\(\s*(\d+)\s*\))?\s*$")
AGENT_NAMES = ("NaiveExecutor", "SearchBooster", "ContractAware", "OracleContract")


def make_agent(spec: str):
    """Build an agent from a name such as ``SearchBooster(4)``."""
    m = _AGENT_RE.match(spec)
    if not m or m.group(1) not in AGENT_NAMES:
        raise ValueError(f"unknown agent {spec!r}; expected one of {', '.join(AGENT_NAMES)}")
    name, arg = m.groups()
    if name == "SearchBooster":
        return SearchBooster(int(arg) if arg else 4)
    if arg:
        raise ValueError(f"agent {name} takes no argument")
    return {"NaiveExecutor": NaiveExecutor, "ContractAware": ContractAware, "OracleContract": OracleContract}[name]()
