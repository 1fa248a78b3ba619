"""One slot, one winner: how the shared channel resolves senders.

The channel has no collision detection: an empty slot, a collided slot,
and a jammed slot all look the same to everyone listening.  This demo
shows the three indistinguishable failure modes, then checks a long
simulation against the exact success-probability formula.
"""

import numpy as np

from contend.core import rng_stream
from contend.engine import resolve_slot, single_slot_success_prob

print("single sender, clear slot  ->", resolve_slot({4}, False))
print("two senders, clear slot    ->", resolve_slot({4, 9}, False))
print("single sender, jammed slot ->", resolve_slot({4}, True))
print("nobody sends               ->", resolve_slot(set(), False))

probs = [0.3, 0.5, 0.8]
target = single_slot_success_prob(probs)
print(f"\nthree senders with p={probs}: exact per-slot success probability {target:.4f}")

rng = rng_stream(1, "demo")
slots = 200_000
hits = 0
for _ in range(slots):
    senders = {i for i, p in enumerate(probs) if rng.random() < p}
    if resolve_slot(senders, False).success:
        hits += 1
print(f"simulated over {slots} slots: {hits / slots:.4f}")
