"""The adversarial workloads, at a glance.

Each strategy fixes its whole schedule up front from the seed, so the
same attack replays identically against any protocol.  The contention
flood is shown twice: with sparse stragglers the backoff target recovers
and transmits; with dense stragglers it stays silent for the whole run.
"""

from contend.engine import run_trial

t = 4096

for label, adversary in [
    ("prefix + random jamming, one node   ", {"name": "theorem3"}),
    ("prefix jam + final flood, two nodes ", {"name": "theorem5"}),
    ("suffix-budgeted smooth workload     ", {"name": "smooth", "cf": 1.0, "cg": 1.0}),
]:
    trace = run_trial({"name": "bexp"}, adversary, t, 5)
    jams = sum(1 for r in trace.records if r.jammed)
    print(f"{label} arrivals={len(trace.arrivals):5d} jams={jams:4d} successes={len(trace.departures):4d}")

print()
for value, label in [(16.0, "sparse stragglers (t/32 extra nodes)"), (0.25, "dense stragglers (2t extra nodes) ")]:
    trace = run_trial(
        {"name": "bexp"},
        {"name": "lemma4", "x1": 1.0, "h": {"kind": "constant", "value": value}},
        t,
        5,
    )
    print(
        f"contention flood, {label}: arrivals={len(trace.arrivals):5d} "
        f"successes={len(trace.departures):4d}"
    )
