"""Compile the travel rebooking document and check a few candidate actions."""

from pathlib import Path

from intentc import Dimension, compile_text, membership, prob_membership
from intentc.casefile import load_case

DATA = Path(__file__).parent / "data"

K = compile_text((DATA / "travel.intent").read_text())
for dim in Dimension:
    print(dim.long_name, "unresolved:", list(K.unresolved[dim]) or "none")
for note in K.notes:  # fields the travel_rebooking profile supplied
    print("note:", note)

case = load_case((DATA / "travel.case").read_text())
e = case.episode

# Each action goes through all four predicates; one False puts it outside.
for a in e.action_space:
    d = membership(a, e, K, case.now)
    print(f"{a.key:24s} {d.summary()}")
    for reason in d.reasons:
        print("   ", reason)

# The probabilistic view: joint p against the per-risk alpha.
hold = e.find_action("hold_fare_150")
print(prob_membership(hold, e, K, case.now))

# Age the inventory snapshot past 15 minutes: the same hold is now outside.
print("at t=+700s:", membership(hold, e, K, 700).summary())
