"""Command-line interface.

Exit status: 0 success, 1 not authorized (boundary, outside, deny, escalate
or abstain), 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from intentc.casefile import Case, CaseFileError, load_case
from intentc.conditions import And, Compare, ConditionSyntaxError, Not, Or, to_source
from intentc.conditions import ATOMS
from intentc.config import Config, load_config
from intentc.document import CompileError, IntentDocumentError, compile_contracts, parse_intent_document
from intentc.envelope import (
    Band,
    PerturbationSpec,
    Verdict,
    check_tightening,
    envelope_stability,
    membership,
    prob_membership,
)
from intentc.metrics import OracleAnnotations, load_traces, metrics_report
from intentc.model import DIMENSIONS, ContractTuple, TaskEpisode
from intentc.router import MoveKind, ProxySignals, estimate_gaps, route

OK, NOT_AUTHORIZED, INPUT_ERROR, INTERNAL_ERROR = 0, 1, 2, 3

_EXPR_TYPES = (*ATOMS, Not, And, Or, Compare)
_INPUT_ERRORS = (
    IntentDocumentError,
    CompileError,
    CaseFileError,
    ConditionSyntaxError,
    OSError,
    ValueError,
)


class InputError(ValueError):
    pass


# Output --------------------------------------------------------------------------


def plain(obj: Any) -> Any:
    """Convert results into JSON-ready data with a stable ordering."""
    if isinstance(obj, _EXPR_TYPES):
        return to_source(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Fraction):
        return obj.numerator if obj.denominator == 1 else float(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.compare or f.name == "diagnostics"}
    if isinstance(obj, dict):
        return {str(plain(k)): plain(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return sorted(plain(x) for x in obj)
    if isinstance(obj, (list, tuple)):
        return [plain(x) for x in obj]
    return obj


def emit(args, data: Any, text: str) -> None:
    if args.format == "json":
        sys.stdout.write(json.dumps(plain(data), sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(text.rstrip("\n") + "\n")


# Loading -------------------------------------------------------------------------


def _contracts(path: str, config: Config) -> ContractTuple:
    doc = parse_intent_document(Path(path).read_text(encoding="utf-8"))
    for line in doc.diagnostics:
        print(f"{path}: warning: {line}", file=sys.stderr)
    return compile_contracts(doc, config=config)


def _case(path: str) -> Case:
    return load_case(Path(path).read_text(encoding="utf-8"))


def _action(e: TaskEpisode, key: str):
    try:
        return e.find_action(key)
    except KeyError:
        raise InputError(f"episode {e.id} has no action {key!r}") from None


# Subcommands ---------------------------------------------------------------------


def _contract_text(K: ContractTuple) -> str:
    lines = []
    for dim in DIMENSIONS:
        body = plain(K.contract(dim))
        lines.append(f"[{dim.long_name}]")
        for key, value in body.items():
            lines.append(f"  {key}: {json.dumps(value, sort_keys=True)}")
        missing = ", ".join(K.unresolved[dim]) or "none"
        lines.append(f"  unresolved: {missing}")
    lines.extend(f"note: {n}" for n in K.notes)
    return "\n".join(lines)


def cmd_compile(args, config: Config) -> int:
    K = _contracts(args.doc, config)
    data = {
        "contracts": {dim.long_name: K.contract(dim) for dim in DIMENSIONS},
        "unresolved": {dim.long_name: list(K.unresolved[dim]) for dim in DIMENSIONS},
        "notes": list(K.notes),
    }
    emit(args, data, _contract_text(K))
    return OK


def cmd_check(args, config: Config) -> int:
    K = _contracts(args.doc, config)
    case = _case(args.episode)
    a = _action(case.episode, args.action_id)
    now = case.now if args.now is None else args.now
    if args.prob:
        d = prob_membership(a, case.episode, K, now, config)
        text = f"{d.band.value} (p={d.p:.6g}, alpha={d.alpha:g}, risk={d.risk.value})"
        emit(args, d, text)
        return OK if d.band is Band.AUTHORIZE else NOT_AUTHORIZED
    d = membership(a, case.episode, K, now, config)
    lines = [d.summary()]
    if args.verbose:
        lines += [f"  {dim.long_name}: {d.per_dim[dim].value.value}" for dim in DIMENSIONS]
        lines += [f"  - {r}" for r in d.reasons]
    emit(args, d, "\n".join(lines))
    return OK if d.verdict is Verdict.INSIDE else NOT_AUTHORIZED


_SIGNAL_ALIASES = {
    "sem": "clarification_count",
    "evid": "citation_conflicts",
    "proc": "retry_depth",
    "inst": "permission_denied_count",
}


def parse_signals(items: Sequence[str]) -> ProxySignals:
    counts: dict[str, int] = {}
    valid = {f.name for f in dataclasses.fields(ProxySignals)}
    for item in items:
        for part in item.split(","):
            if not part.strip():
                continue
            name, sep, value = part.partition("=")
            name = _SIGNAL_ALIASES.get(name.strip(), name.strip())
            if not sep or name not in valid:
                raise InputError(f"bad signal {part!r}; expected NAME=COUNT with NAME in {sorted(valid)}")
            try:
                counts[name] = int(value)
            except ValueError:
                raise InputError(f"signal {name} needs an integer count") from None
    return ProxySignals(**counts)


def cmd_route(args, config: Config) -> int:
    K = _contracts(args.doc, config)
    case = _case(args.episode)
    e = case.episode
    if args.action:
        a = _action(e, args.action)
    elif e.action_space:
        a = e.action_space[0]
    else:
        raise InputError("episode has no candidate action to route")
    now = case.now if args.now is None else args.now
    gaps = estimate_gaps(e, K, parse_signals(args.signals or ()), a, now, config)
    move = route(gaps, membership(a, e, K, now, config), args.checker, config.thresholds, K)
    target = f" [{move.target_dimension.long_name}]" if move.target_dimension else ""
    text = f"{move.kind.value}{target}: {move.reason}\ngaps: " + ", ".join(f"{k}={v:.3g}" for k, v in gaps.as_dict().items())
    emit(args, {"move": move, "gaps": gaps.as_dict(), "action": a.key}, text)
    return NOT_AUTHORIZED if move.kind in (MoveKind.ESCALATE, MoveKind.ABSTAIN) else OK


def cmd_trace(args, config: Config) -> int:
    K = _contracts(args.doc, config)
    case = _case(args.episode)
    e = case.episode
    actions = {a.key: a for a in e.action_space}
    traces = load_traces(Path(args.trace_file).read_text(encoding="utf-8"), actions)
    if e.id not in traces:
        raise InputError(f"trace file has no events for episode {e.id}")
    trace = traces[e.id]
    note = case.annotations or OracleAnnotations(
        requires_escalation=bool(e.requires_escalation),
        authorized={a.key: membership(a, e, K, case.now, config).verdict is Verdict.INSIDE for a in e.action_space},
    )
    report = metrics_report([trace], {e.id: note}, K, {e.id: e}, config=config)
    data = report.to_dict()
    text = "\n".join(f"{k}: {json.dumps(v, sort_keys=True)}" for k, v in data.items())
    emit(args, data, text)
    return OK


def cmd_tighten(args, config: Config) -> int:
    K1 = _contracts(args.doc1, config)
    K2 = _contracts(args.doc2, config)
    case = _case(args.episode)
    result = check_tightening(K1, K2, case.episode, case.now, config)
    if result.tightening:
        text = "tightening: every action inside the revised envelope is inside the original"
    else:
        text = f"not tightening: {result.witness.key} is inside the revised envelope only"
    emit(args, {"tightening": result.tightening, "witness": None if result.witness is None else result.witness.key}, text)
    return OK


def cmd_stability(args, config: Config) -> int:
    K = _contracts(args.doc, config)
    case = _case(args.episode)
    specs = [PerturbationSpec.parse(s) for s in args.perturb]
    value = envelope_stability(K, case.episode, specs, case.now, config)
    emit(args, {"stability": value, "perturbations": [s.kind.value for s in specs]}, f"stability: {value:.12g}")
    return OK


def cmd_bench(args, config: Config) -> int:
    from intentc.bench.suite import load_manifest, report_json, run_suite

    report = run_suite(load_manifest(args.manifest), config)
    payload = report_json(report)
    if args.output:
        Path(args.output).write_text(payload, encoding="utf-8")
    if args.format == "json":
        sys.stdout.write(payload)
        return OK
    lines = [f"{'agent':<18} {'dim':<5} {'n':>3} {'false_auto':>10} {'compliance':>10}  labels"]
    for cell in report["cells"]:
        m = cell["metrics"]
        labels = ", ".join(f"{k}={v}" for k, v in cell["labels"].items() if v)

        def fmt(x):
            return "-" if x is None else f"{x:.3g}"

        lines.append(
            f"{cell['agent']:<18} {cell['dimension']:<5} {cell['episodes']:>3} "
            f"{fmt(m['false_autonomy_rate']):>10} {fmt(m['contract_compliance']):>10}  {labels}"
        )
    for skipped in report["skipped"]:
        lines.append(f"skipped (nothing to perturb): {skipped}")
    sys.stdout.write("\n".join(lines) + "\n")
    return OK


# Parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text", help="output format")
    common.add_argument("--config", help="configuration file (default: $INTENTC_CONFIG)")

    parser = argparse.ArgumentParser(prog="intentc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("compile", parents=[common], help="compile an intent document")
    p.add_argument("doc")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("check", parents=[common], help="check an action against the envelope")
    p.add_argument("doc")
    p.add_argument("episode")
    p.add_argument("action_id")
    p.add_argument("--prob", action="store_true", help="probabilistic authorize/ask/deny band")
    p.add_argument("--now", type=float, help="evaluation time (default: the case's now)")
    p.add_argument("-v", "--verbose", action="store_true", help="list per-dimension values and reasons")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("route", parents=[common], help="estimate closure gaps and pick the next move")
    p.add_argument("doc")
    p.add_argument("episode")
    p.add_argument("--signals", nargs="*", metavar="NAME=COUNT", help="proxy counts, e.g. retry_depth=2 or proc=2")
    p.add_argument("--action", help="candidate action id (default: first in the action space)")
    p.add_argument("--checker", type=lambda s: s.lower() in ("1", "true", "pass", "yes"), help="competence checker result")
    p.add_argument("--now", type=float)
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("trace", parents=[common], help="metrics over a trace file")
    p.add_argument("trace_file")
    p.add_argument("doc")
    p.add_argument("episode")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("tighten", parents=[common], help="check that doc2 tightens doc1 on an episode")
    p.add_argument("doc1")
    p.add_argument("doc2")
    p.add_argument("episode")
    p.set_defaults(func=cmd_tighten)

    p = sub.add_parser("stability", parents=[common], help="envelope stability under contract perturbations")
    p.add_argument("doc")
    p.add_argument("episode")
    p.add_argument("--perturb", nargs="+", required=True, metavar="KIND[:MAG[:SEED]]")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("bench", parents=[common], help="run a benchmark suite manifest")
    p.add_argument("manifest")
    p.add_argument("--output", help="also write the JSON report here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code not in (0, None) else OK
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except _INPUT_ERRORS as exc:
        print(f"intentc: error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except Exception as exc:  # noqa: BLE001 - last-resort status for the shell
        print(f"intentc: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
