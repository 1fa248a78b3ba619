"""Post-hoc trace analytics: special slots, complete intervals, throughput.

Slots are classified from the recorded lifecycle data alone, a trace is
cut into disjoint complete intervals between special slots, and the
arrivals/jams bound on active slots is checked.  Everything here is a
pure function of the Trace, so analyses replay exactly.

Special slots:
  beginning   some node is active and every active node arrived at this
              slot's start
  ending      exactly one node is active at the slot's start and it
              succeeds here
  transition  a success slot that re-synchronizes the active nodes; with
              b the last beginning slot at or before t, either (1) no
              success occurred in [b, t-1], or (2) t minus the previous
              transition r is odd and no success sits at the slots of
              t's parity strictly between r and t.

A slot can be all three at once (a lone arrival that succeeds
immediately); such slots are surfaced in the analyze summary rather than
reinterpreted.

Complete intervals run from a beginning slot to the first transition at
or after it, from just after a transition to the next transition, or
from just after a transition to the next ending slot when the system
empties first.  Their per-interval arrival counts include every node
that started its first or second protocol phase inside the interval, so
one node can be a new arrival of at most two intervals.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ParamSet
from .engine import Trace

__all__ = [
    "CompleteInterval",
    "SlotClass",
    "ThroughputReport",
    "TraceCorruption",
    "build_complete_intervals",
    "classify_slots",
    "count_active",
    "success_curve",
    "throughput_report",
    "truncated_length",
]


class TraceCorruption(ValueError):
    """A trace violates the structural assumptions of the analyzer."""


@dataclass(frozen=True)
class SlotClass:
    """Per-slot classification flags."""

    beginning: bool
    ending: bool
    transition: bool
    active: bool
    success: bool
    jammed: bool


@dataclass(frozen=True)
class CompleteInterval:
    """One analysis segment between special slots, with its budget counts."""

    kind: str  # begin_to_transition | transition_to_transition | transition_to_ending
    start: int
    end: int
    new_arrivals: int
    jams: int
    successes: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def classify_slots(trace: Trace) -> list:
    """Classify every slot of the trace; evaluated left to right.

    Condition (1) of the transition rule is vacuously true when the slot
    is itself a beginning slot, and only condition (1) can apply before
    the first transition exists.
    """
    classes = []
    last_beginning: Optional[int] = None
    last_transition: Optional[int] = None
    last_success: Optional[int] = None
    last_success_parity: dict = {0: None, 1: None}
    for rec in trace.records:
        t = rec.slot
        active = rec.active_count >= 1
        success = rec.outcome.success
        carryover = rec.active_count - len(rec.injected)
        beginning = active and carryover == 0
        ending = rec.active_count == 1 and success
        transition = False
        if success:
            b = t if beginning else last_beginning
            cond1 = b is not None and (last_success is None or last_success < b)
            cond2 = False
            if last_transition is not None and (t - last_transition) % 2 == 1:
                same_parity = last_success_parity[t & 1]
                cond2 = same_parity is None or same_parity <= last_transition
            transition = cond1 or cond2
        classes.append(
            SlotClass(
                beginning=beginning,
                ending=ending,
                transition=transition,
                active=active,
                success=success,
                jammed=rec.jammed,
            )
        )
        if beginning:
            last_beginning = t
        if success:
            last_success = t
            last_success_parity[t & 1] = t
        if transition:
            last_transition = t
    return classes


def build_complete_intervals(trace: Trace, classes: Optional[list] = None) -> list:
    """Cut the trace into complete intervals and annotate their counts.

    Raises TraceCorruption on structurally impossible traces (a success
    with no lone broadcaster, or activity outside any segment).
    """
    if classes is None:
        classes = classify_slots(trace)
    spans = []
    open_start: Optional[int] = None
    open_from_transition = False
    last_transition: Optional[int] = None
    for rec, cls in zip(trace.records, classes):
        t = rec.slot
        if cls.success and (len(rec.broadcasters) != 1 or rec.jammed):
            raise TraceCorruption(f"slot {t}: success recorded without a lone unjammed broadcaster")
        if open_start is None and cls.active:
            if cls.beginning:
                open_start, open_from_transition = t, False
            elif last_transition == t - 1:
                open_start, open_from_transition = t, True
            else:
                raise TraceCorruption(
                    f"slot {t}: active slot outside any segment (not a beginning slot and "
                    f"not directly after a transition)"
                )
        if open_start is not None:
            if cls.transition:
                kind = "transition_to_transition" if open_from_transition else "begin_to_transition"
                spans.append((open_start, t, kind))
                open_start = None
            elif cls.ending:
                if not open_from_transition:
                    raise TraceCorruption(
                        f"slot {t}: ending slot inside a beginning-anchored segment with no transition"
                    )
                spans.append((open_start, t, "transition_to_ending"))
                open_start = None
        if cls.transition:
            last_transition = t
    return _annotate(trace, spans)


def _annotate(trace: Trace, spans: list) -> list:
    if not spans:
        return []
    jam_prefix = np.concatenate(([0], np.cumsum([1 if r.jammed else 0 for r in trace.records])))
    suc_prefix = np.concatenate(([0], np.cumsum([1 if r.outcome.success else 0 for r in trace.records])))
    starts = [span[0] for span in spans]
    ends = [span[1] for span in spans]
    arrivals = [0] * len(spans)

    def span_of(slot: int) -> Optional[int]:
        i = bisect.bisect_right(starts, slot) - 1
        if i >= 0 and slot <= ends[i]:
            return i
        return None

    for node, arrival_slot in trace.arrivals.items():
        first = span_of(arrival_slot)
        if first is not None:
            arrivals[first] += 1
        p2 = trace.p2_start.get(node)
        if p2 is not None:
            second = span_of(p2)
            if second is not None and second != first:
                arrivals[second] += 1
    out = []
    for i, (start, end, kind) in enumerate(spans):
        out.append(
            CompleteInterval(
                kind=kind,
                start=start,
                end=end,
                new_arrivals=arrivals[i],
                jams=int(jam_prefix[end] - jam_prefix[start - 1]),
                successes=int(suc_prefix[end] - suc_prefix[start - 1]),
            )
        )
    return out


def truncated_length(interval: CompleteInterval, params: ParamSet, f: Callable, g: Callable) -> int:
    """Interval length, zeroed when the workload was heavy or the interval productive.

    The length survives only if arrivals stay within a*l/(64*c*c3*c1*f(l)),
    jams within a*l/(64*c*c3*c1*g(l)), and successes strictly below
    l/(32*c*c3*(t0+2)); otherwise the truncated length is 0.  Since every
    complete interval closes with a success, short intervals always
    truncate to 0 under desk-scale constants.
    """
    l = interval.length
    shared = 64.0 * params.c * params.c3 * params.c1
    ok_arrivals = interval.new_arrivals <= params.a * l / (shared * float(f(l)))
    ok_jams = interval.jams <= params.a * l / (shared * float(g(l)))
    ok_successes = interval.successes < l / (32.0 * params.c * params.c3 * (params.t0 + 2.0))
    return l if (ok_arrivals and ok_jams and ok_successes) else 0


def count_active(trace: Trace, t: int) -> int:
    """Number of slots in [1, t] with at least one node present."""
    if t > trace.horizon:
        raise ValueError(f"t={t} exceeds trace horizon {trace.horizon}")
    return sum(1 for rec in trace.records[:t] if rec.active_count >= 1)


@dataclass(frozen=True)
class ThroughputReport:
    """Active-slot accounting against the n_t*f(t) + d_t*g(t) budget."""

    t: int
    n_t: int
    d_t: int
    active_slots: int
    f_val: float
    g_val: float

    @property
    def bound(self) -> float:
        return self.n_t * self.f_val + self.d_t * self.g_val

    @property
    def satisfied(self) -> bool:
        return self.active_slots <= self.bound


def throughput_report(trace: Trace, t: int, f: Callable, g: Callable) -> ThroughputReport:
    """Check the first t slots of a trace against the arrival/jam budget."""
    if t > trace.horizon:
        raise ValueError(f"t={t} exceeds trace horizon {trace.horizon}")
    n_t = sum(len(rec.injected) for rec in trace.records[:t])
    d_t = sum(1 for rec in trace.records[:t] if rec.jammed)
    return ThroughputReport(
        t=t,
        n_t=n_t,
        d_t=d_t,
        active_slots=count_active(trace, t),
        f_val=float(f(t)),
        g_val=float(g(t)),
    )


def success_curve(trace: Trace) -> list:
    """Per-slot cumulative success counts, as (slot, count) pairs."""
    out = []
    total = 0
    for rec in trace.records:
        if rec.outcome.success:
            total += 1
        out.append((rec.slot, total))
    return out
