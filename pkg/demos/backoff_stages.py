"""Staged backoff: doubling stages, a handful of send slots per stage.

A sender's stage k covers 2^k consecutive slots of its channel; on
entering the stage it draws ceil(h(2^k)) slots uniformly (with
replacement) and broadcasts only in those.  Contention per slot decays
geometrically while the number of send attempts grows slowly.
"""

from contend.core import ParamSet, RateFunction, eval_f, rng_stream
from contend.protocols import Backoff, backoff_schedule_stage, backoff_stage_interval

params = ParamSet()
g = RateFunction(kind="constant", value=16.0)
h = lambda n: eval_f(params, g, n) / params.a  # noqa: E731

print("stage intervals for a backoff started at channel slot 1:")
for k in range(5):
    print(f"  stage {k}: slots {list(backoff_stage_interval(1, k))}")

rng = rng_stream(11, "demo")
print("\nschedules drawn with the default send-rate curve:")
for k in range(8):
    sched = backoff_schedule_stage(1, k, h, rng)
    print(f"  stage {k} ({2**k:4d} slots): sends at {sched}")

print("\na single sender stepped through its first 64 channel slots:")
node = Backoff(h, rng_stream(11, "demo"))
sends = [local for local in range(1, 65) if node.step()]
print(f"  broadcasts at channel slots {sends}")
print("  (slot 1 is always drawn: the very first stage is a single slot)")
