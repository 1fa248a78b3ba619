"""Active-slot accounting: arrivals and jams buy the channel busy time.

A run satisfies the throughput budget when its active slots stay within
n_t*f(t) + d_t*g(t).  The analyzer cuts the trace into complete
intervals between special slots; each interval's arrival/jam/success
counts show who paid for its length.
"""

from contend.core import ParamSet, RateFunction, eval_f
from contend.engine import run_trial
from contend.analysis import build_complete_intervals, classify_slots, throughput_report, truncated_length

params = ParamSet()
g = RateFunction(kind="constant", value=16.0)
f = lambda x: eval_f(params, g, x)  # noqa: E731

trace = run_trial(
    {"name": "three_phase"},
    {"name": "random_jam", "rate": 0.1, "script": {"kind": "uniform", "n": 40}},
    2048,
    9,
)

report = throughput_report(trace, trace.horizon, f, g)
print(f"horizon {report.t}: arrivals {report.n_t}, jams {report.d_t}, active slots {report.active_slots}")
print(f"budget {report.n_t}*f({report.t}) + {report.d_t}*g({report.t}) = {report.bound:.1f}")
print("within budget" if report.satisfied else "BUDGET VIOLATED")

classes = classify_slots(trace)
intervals = build_complete_intervals(trace, classes)
print(f"\nspecial slots: {sum(c.beginning for c in classes)} beginning, "
      f"{sum(c.transition for c in classes)} transition, {sum(c.ending for c in classes)} ending")
print(f"complete intervals ({len(intervals)} total, first five):")
for iv in intervals[:5]:
    lbar = truncated_length(iv, params, f, g)
    print(f"  [{iv.start:4d}, {iv.end:4d}] {iv.kind:26s} arrivals={iv.new_arrivals:3d} "
          f"jams={iv.jams:3d} successes={iv.successes:3d} truncated_length={lbar}")
print("(short intervals always truncate to zero: their closing success already pays for them)")
