"""contend: contention resolution on a multiple-access channel, under jamming.

A seeded, slot-level simulator of senders competing for a shared channel
without collision detection, together with the adversarial workloads used
to stress them and the trace analytics that account for throughput.
"""

from .core import ParamSet, RateFunction, eval_f, eval_h_ctrl, eval_h_data, rng_stream
from .engine import (
    NO_SUCCESS,
    SlotOutcome,
    SlotRecord,
    Trace,
    resolve_slot,
    run_trial,
    single_slot_success_prob,
)

__version__ = "0.1.0"

__all__ = [
    "ParamSet",
    "RateFunction",
    "eval_f",
    "eval_h_ctrl",
    "eval_h_data",
    "rng_stream",
    "SlotOutcome",
    "SlotRecord",
    "Trace",
    "NO_SUCCESS",
    "resolve_slot",
    "run_trial",
    "single_slot_success_prob",
    "__version__",
]
