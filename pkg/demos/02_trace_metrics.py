"""Time-to-authorized-action and accounting weights for a short trace."""

from pathlib import Path

from intentc import accounting_weights, compile_text, metrics_report, time_to_authorized
from intentc.casefile import load_case
from intentc.metrics import OracleAnnotations, load_traces

DATA = Path(__file__).parent / "data"
K = compile_text((DATA / "travel.intent").read_text())
case = load_case((DATA / "travel.case").read_text())
e = case.episode

traces = load_traces((DATA / "travel.trace.jsonl").read_text(), {a.key: a for a in e.action_space})
trace = traces[e.id]
for ev in trace.events:
    print(ev.q.value, ev.s, ev.f, ev.action.key if ev.action else "")

print("T_authorized:", time_to_authorized(trace, K, e))  # the ratified execute starts at 10
print("W_q:", accounting_weights(trace))  # costs default to f - s

note = OracleAnnotations(authorized={"hold_fare_150": True})
report = metrics_report([trace], {e.id: note}, K, {e.id: e})
for name, value in report.to_dict().items():
    print(f"{name:24s} {value}")
