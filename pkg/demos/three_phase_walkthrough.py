"""A batch of senders working through the three-phase protocol.

Phase 1 synchronizes everyone on the role of the two slot parities,
phase 2 produces the success that anchors the batch, and phase 3 drains
messages through the data channel while the control channel waits to
re-synchronize.  The trace below shows the two sync successes and then a
steady stream of deliveries.
"""

from contend.engine import run_trial
from contend.analysis import build_complete_intervals, classify_slots

n = 64
trace = run_trial(
    {"name": "three_phase"},
    {"name": "none", "script": {"kind": "batch", "n": n, "slot": 1}},
    4096,
    2,
)

successes = sorted(trace.departures.values())
print(f"{n} nodes injected at slot 1; {len(successes)} delivered by slot {trace.horizon}")
print(f"first success (phase-1 sync) at slot {successes[0]}")
print(f"second success (phase-2 sync) at slot {successes[1]}")
print(f"next ten deliveries at {successes[2:12]}")

p2 = sorted(set(trace.p2_start.values()))
print(f"\nphase-2 start slots observed: {p2[:5]} (all survivors re-anchor together)")

classes = classify_slots(trace)
intervals = build_complete_intervals(trace, classes)
print(f"transition slots: {[r.slot for r, c in zip(trace.records, classes) if c.transition][:6]} ...")
print(f"complete intervals: {len(intervals)}; first three: "
      f"{[(iv.start, iv.end, iv.kind) for iv in intervals[:3]]}")
