"""Node-side protocol state machines.

Two layers live here.  The reference classes (Backoff, Batch,
ThreePhaseNode, FixedSchedule) define the per-node semantics one slot at
a time and are what the unit tests pin down.  The *Population classes
are the engine-facing implementations of the same rules over many nodes
at once, vectorized so that trials with thousands of senders stay fast;
their behavior is cross-checked against the reference layer in the test
suite.

Channel-local indexing: a sender's subroutine counts only the slots of
its assigned parity.  The j-th channel slot of parity p starting at
global slot s is the global slot s + 2*(j-1); a node never needs to know
whether its parity is the odd or the even one.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .core import ParamSet, RateFunction, eval_f, eval_h_ctrl, eval_h_data, rng_stream
from .engine import ConfigError, SlotOutcome

__all__ = [
    "Backoff",
    "Batch",
    "FixedSchedule",
    "ThreePhaseNode",
    "backoff_draw_count",
    "backoff_schedule_stage",
    "backoff_stage_interval",
    "batch_protocol_step",
    "batch_survival_trial",
    "binary_exponential_backoff_step",
    "build_population",
    "channel_slot_to_global",
    "fixed_schedule_step",
    "three_phase_step",
    "PROTOCOL_NAMES",
]

_SENTINEL = np.int64(2**62)

PROTOCOL_NAMES = ("three_phase", "bexp", "batch", "fixed")


# ---------------------------------------------------------------------------
# staged backoff primitives


def backoff_stage_interval(l: int, k: int) -> range:
    """Channel-local slots of stage k for a backoff started at channel slot l.

    Stage k is the half-open interval [l-1+2^k, l-1+2^(k+1)), which has
    exactly 2^k slots.
    """
    if l < 1 or k < 0:
        raise ValueError("need l >= 1 and k >= 0")
    return range(l - 1 + 2**k, l - 1 + 2 ** (k + 1))


def backoff_draw_count(h: Callable[[int], float], stage_len: int) -> int:
    """Number of send draws for a stage: ceil(h(len)), at least 1."""
    return max(1, math.ceil(h(stage_len)))


def backoff_schedule_stage(l: int, k: int, h: Callable[[int], float], rng: np.random.Generator) -> list:
    """Draw a stage's send slots uniformly with replacement from its interval.

    Returns the multiset of drawn channel-local slots, sorted.  The node
    broadcasts in a slot iff the slot appears at least once.
    """
    interval = backoff_stage_interval(l, k)
    count = backoff_draw_count(h, len(interval))
    draws = rng.integers(interval.start, interval.stop, size=count)
    return sorted(int(d) for d in draws)


def channel_slot_to_global(start: int, j: int) -> int:
    """Global slot of the j-th channel slot (1-based) of the parity of `start`."""
    if start < 1 or j < 1:
        raise ValueError("need start >= 1 and j >= 1")
    return start + 2 * (j - 1)


class Backoff:
    """Reference staged sender over one channel (single node).

    Advance it exactly once per channel slot of the node's parity; it
    draws each stage's send schedule on entry and reports whether the
    node broadcasts in the current channel slot.
    """

    def __init__(self, h: Callable[[int], float], rng: np.random.Generator):
        self.h = h
        self.rng = rng
        self.local = 0
        self.stage = -1
        self.scheduled: set = set()

    def step(self) -> bool:
        self.local += 1
        if self.local & (self.local - 1) == 0:
            self.stage += 1
            self.scheduled = set(backoff_schedule_stage(1, self.stage, self.h, self.rng))
        return self.local in self.scheduled


class Batch:
    """Reference batch sender: sends w.p. min(1, h(k)) in its k-th channel slot."""

    def __init__(self, h: Callable[[int], float]):
        self.h = h
        self.k = 0

    def step(self, rng: np.random.Generator) -> bool:
        self.k += 1
        return bool(rng.random() < min(1.0, self.h(self.k)))


def batch_protocol_step(state: Batch, rng: np.random.Generator) -> bool:
    """Advance a batch sender one channel slot and return its decision."""
    return state.step(rng)


def binary_exponential_backoff_step(state: Batch, rng: np.random.Generator) -> bool:
    """Advance a 1/i-probability sender one slot (state must use h(x)=1/x)."""
    return state.step(rng)


class FixedSchedule:
    """Reference non-adaptive sender: probability schedule(i) in its i-th slot.

    The schedule never reacts to the jam pattern.  After a heard success
    the index either restarts from 1 (default) or keeps counting,
    depending on `after_success`.
    """

    def __init__(self, schedule: Callable[[int], float], after_success: str = "restart"):
        if after_success not in ("restart", "continue"):
            raise ConfigError(f"after_success must be 'restart' or 'continue', got {after_success!r}")
        self.schedule = schedule
        self.after_success = after_success
        self.i = 0

    def step(self, rng: np.random.Generator) -> bool:
        self.i += 1
        return bool(rng.random() < min(1.0, self.schedule(self.i)))

    def observe(self, outcome: SlotOutcome) -> None:
        if outcome.success and self.after_success == "restart":
            self.i = 0


def fixed_schedule_step(state: FixedSchedule, rng: np.random.Generator) -> bool:
    """Advance a fixed-schedule sender one slot and return its decision."""
    return state.step(rng)


class ThreePhaseNode:
    """Reference single-node implementation of the three-phase sender.

    Phase 1 runs a staged (f/a)-backoff on the arrival slot's parity until
    any success is heard (slot l1).  Phase 2 runs a fresh (f/a)-backoff on
    the opposite parity from slot l1+1 until a success lands on that
    parity (slot l2, which becomes l3).  Phase 3 runs a control batch
    (rate c3*log2(k)/k) from slot l3+1 and a data batch (rate 1/k) from
    slot l3+2, on opposite parities; a success on the control parity
    re-anchors phase 3 at that slot, which swaps the two channels.

    Call wants_send once per global slot while active, then observe with
    the slot's outcome.  If two successes arrive on consecutive slots of
    different parities, the earliest one drives the transition.
    """

    def __init__(self, params: ParamSet, g: RateFunction, arrival: int, rng: np.random.Generator):
        self.params = params
        self.g = g
        self.rng = rng
        self.arrival = arrival
        self.phase = 1
        self.anchor = arrival  # first channel slot of the current backoff
        self.backoff = Backoff(self._h_backoff, rng)
        self.l1: Optional[int] = None
        self.l3: Optional[int] = None
        self.p2_start: Optional[int] = None

    def _h_backoff(self, stage_len: int) -> float:
        return eval_f(self.params, self.g, stage_len) / self.params.a

    def wants_send(self, slot: int) -> bool:
        if self.phase in (1, 2):
            if slot >= self.anchor and (slot - self.anchor) % 2 == 0:
                return self.backoff.step()
            return False
        delta = slot - self.l3
        if delta % 2 == 1:  # control parity: slots l3+1, l3+3, ...
            k = (delta - 1) // 2 + 1
            return bool(self.rng.random() < eval_h_ctrl(self.params, k))
        if delta >= 2:  # data parity: slots l3+2, l3+4, ...
            k = (delta - 2) // 2 + 1
            return bool(self.rng.random() < eval_h_data(k))
        return False

    def observe(self, slot: int, outcome: SlotOutcome) -> None:
        if not outcome.success:
            return
        if self.phase == 1:
            self.phase = 2
            self.l1 = slot
            self.anchor = slot + 1
            self.backoff = Backoff(self._h_backoff, self.rng)
            self.p2_start = slot + 1
        elif self.phase == 2:
            if (slot - self.anchor) % 2 == 0:  # success on my phase-2 parity
                self.phase = 3
                self.l3 = slot
        else:
            if (slot - self.l3) % 2 == 1:  # success on my control parity
                self.l3 = slot


def three_phase_step(node: ThreePhaseNode, slot: int) -> bool:
    """Advance a three-phase node one global slot and return its decision."""
    return node.wants_send(slot)


# ---------------------------------------------------------------------------
# engine-facing populations (vectorized over nodes)


class _Population:
    """Shared bookkeeping: contiguous ids, alive mask, arrival slots."""

    def __init__(self, seed: int):
        self.coin_rng = rng_stream(seed, "coins")
        self.n = 0
        self.alive_count = 0
        self._alive = np.zeros(0, dtype=bool)
        self._arrival = np.zeros(0, dtype=np.int64)
        self._alive_stale = True
        self._alive_idx = np.empty(0, dtype=np.int64)

    def _append(self, arr: np.ndarray, count: int, fill) -> np.ndarray:
        out = np.empty(len(arr) + count, dtype=arr.dtype)
        out[: len(arr)] = arr
        out[len(arr) :] = fill
        return out

    def add(self, ids, slot: int) -> None:
        count = len(ids)
        if count == 0:
            return
        if ids[0] != self.n or ids[-1] != self.n + count - 1:
            raise ValueError("node ids must be assigned contiguously in injection order")
        self._alive = self._append(self._alive, count, True)
        self._arrival = self._append(self._arrival, count, 0)
        self._arrival[self.n :] = slot
        self.n += count
        self.alive_count += count
        self._alive_stale = True

    def _alive_indices(self) -> np.ndarray:
        if self._alive_stale:
            self._alive_idx = np.flatnonzero(self._alive)
            self._alive_stale = False
        return self._alive_idx

    def _remove_winner(self, outcome: SlotOutcome) -> None:
        w = outcome.winner
        if w is not None and w < self.n and self._alive[w]:
            self._alive[w] = False
            self.alive_count -= 1
            self._alive_stale = True

    def p2_starts(self) -> dict:
        return {}


class BatchPopulation(_Population):
    """All nodes run one h-batch on the full channel from their arrival slot.

    Covers both the plain 1/i exponential-backoff sender and standalone
    h-batches; nodes ignore everything but their own success.
    """

    def __init__(self, h_kind: str, seed: int, params: ParamSet, h_value: float = 1.0):
        super().__init__(seed)
        if h_kind not in ("data", "ctrl", "constant"):
            raise ConfigError(f"unknown batch rate kind {h_kind!r}")
        self.h_kind = h_kind
        self.h_value = h_value
        self.params = params

    def _probs(self, k: np.ndarray) -> np.ndarray:
        kf = k.astype(np.float64)
        if self.h_kind == "data":
            return np.minimum(1.0, 1.0 / kf)
        if self.h_kind == "ctrl":
            return np.minimum(1.0, self.params.c3 * np.log2(kf) / kf)
        return np.minimum(1.0, np.full_like(kf, self.h_value))

    def senders(self, slot: int) -> np.ndarray:
        if self.alive_count == 0:
            return np.empty(0, dtype=np.int64)
        idx = self._alive_indices()
        k = slot - self._arrival[idx] + 1
        coins = self.coin_rng.random(idx.size)
        return idx[coins < self._probs(k)]

    def observe(self, slot: int, outcome: SlotOutcome) -> None:
        self._remove_winner(outcome)


class FixedSchedulePopulation(_Population):
    """Non-adaptive senders with a pre-defined per-slot probability schedule."""

    def __init__(self, schedule_kind: str, seed: int, value: float = 0.5, values: tuple = (), after_success: str = "restart"):
        super().__init__(seed)
        if schedule_kind not in ("harmonic", "constant", "table"):
            raise ConfigError(f"unknown fixed schedule kind {schedule_kind!r}")
        if after_success not in ("restart", "continue"):
            raise ConfigError(f"after_success must be 'restart' or 'continue', got {after_success!r}")
        if schedule_kind == "table" and not values:
            raise ConfigError("table schedule needs at least one probability")
        self.schedule_kind = schedule_kind
        self.value = value
        self.values = np.asarray(values, dtype=np.float64) if values else None
        self.after_success = after_success
        self._anchor = np.zeros(0, dtype=np.int64)

    def add(self, ids, slot: int) -> None:
        count = len(ids)
        super().add(ids, slot)
        if count:
            self._anchor = self._append(self._anchor, count, slot)

    def _probs(self, i: np.ndarray) -> np.ndarray:
        ii = i.astype(np.float64)
        if self.schedule_kind == "harmonic":
            return np.minimum(1.0, 1.0 / ii)
        if self.schedule_kind == "constant":
            return np.minimum(1.0, np.full_like(ii, self.value))
        idx = np.minimum(i, len(self.values)) - 1
        return np.minimum(1.0, self.values[idx])

    def senders(self, slot: int) -> np.ndarray:
        if self.alive_count == 0:
            return np.empty(0, dtype=np.int64)
        idx = self._alive_indices()
        i = slot - self._anchor[idx] + 1
        coins = self.coin_rng.random(idx.size)
        return idx[coins < self._probs(i)]

    def observe(self, slot: int, outcome: SlotOutcome) -> None:
        self._remove_winner(outcome)
        if outcome.success and self.after_success == "restart":
            self._anchor[self._alive] = slot + 1


class ThreePhasePopulation(_Population):
    """Vectorized three-phase senders (same rules as ThreePhaseNode).

    Backoff send slots are drawn per node from that node's own stream
    ("node:<id>") at stage entry; batch coins are drawn per slot from the
    population's coin stream.  `_anchor` holds the backoff start slot in
    phases 1-2 and l3 in phase 3.
    """

    def __init__(self, params: ParamSet, g: RateFunction, seed: int):
        super().__init__(seed)
        self.params = params
        self.g = g
        self.seed = seed
        self._phase = np.zeros(0, dtype=np.int8)
        self._anchor = np.zeros(0, dtype=np.int64)
        self._next_send = np.zeros(0, dtype=np.int64)
        self._rest: list = []  # remaining scheduled locals of the current stage
        self._rngs: list = []  # per-node generators, created lazily
        self._p2_start: dict = {}
        self._draws_by_len: dict = {}  # stage length -> number of send draws
        # membership/anchors only change on successes or injections; cache
        # the compact per-phase views between those events
        self._stale = True
        self._bo_idx = np.empty(0, dtype=np.int64)
        self._bo_anchor = np.empty(0, dtype=np.int64)
        self._p3_idx = np.empty(0, dtype=np.int64)
        self._p3_anchor = np.empty(0, dtype=np.int64)

    def add(self, ids, slot: int) -> None:
        count = len(ids)
        super().add(ids, slot)
        if not count:
            return
        self._phase = self._append(self._phase, count, 1)
        self._anchor = self._append(self._anchor, count, slot)
        self._next_send = self._append(self._next_send, count, _SENTINEL)
        self._rest.extend(() for _ in range(count))
        self._rngs.extend(None for _ in range(count))
        self._stale = True

    def _refresh(self) -> None:
        backoff = self._alive & (self._phase < 3)
        self._bo_idx = np.flatnonzero(backoff)
        self._bo_anchor = self._anchor[self._bo_idx]
        p3 = self._alive & (self._phase == 3)
        self._p3_idx = np.flatnonzero(p3)
        self._p3_anchor = self._anchor[self._p3_idx]
        self._stale = False

    def _h_backoff(self, stage_len: int) -> float:
        return eval_f(self.params, self.g, stage_len) / self.params.a

    def _stage_draws(self, stage_len: int) -> int:
        count = self._draws_by_len.get(stage_len)
        if count is None:
            count = backoff_draw_count(self._h_backoff, stage_len)
            self._draws_by_len[stage_len] = count
        return count

    def _enter_stage(self, i: int, local: int) -> None:
        rng = self._rngs[i]
        if rng is None:
            rng = self._rngs[i] = rng_stream(self.seed, f"node:{i}")
        count = self._stage_draws(local)  # stage length == first local of the stage
        draws = rng.integers(local, 2 * local, size=count)
        sched = sorted({int(d) for d in draws})
        self._next_send[i] = sched[0]
        self._rest[i] = sched[1:]

    def _advance(self, i: int) -> None:
        rest = self._rest[i]
        if rest:
            self._next_send[i] = rest[0]
            self._rest[i] = rest[1:]
        else:
            self._next_send[i] = _SENTINEL

    def senders(self, slot: int) -> np.ndarray:
        if self.alive_count == 0:
            return np.empty(0, dtype=np.int64)
        if self._stale:
            self._refresh()
        parts = []
        if self._bo_idx.size:
            delta = slot - self._bo_anchor
            on_channel = (delta >= 0) & ((delta & 1) == 0)
            if on_channel.any():
                sub = self._bo_idx[on_channel]
                local = (delta[on_channel] >> 1) + 1
                entering = (local & (local - 1)) == 0
                if entering.any():
                    for i, stage_len in zip(sub[entering], local[entering]):
                        self._enter_stage(int(i), int(stage_len))
                idx = sub[local == self._next_send[sub]]
                for i in idx:
                    self._advance(int(i))
                if idx.size:
                    parts.append(idx)
        m = self._p3_idx.size
        if m:
            delta = slot - self._p3_anchor  # >= 1: l3 is always in the past
            is_ctrl = (delta & 1) == 1
            k = ((delta >> 1) + is_ctrl).astype(np.float64)
            probs = np.where(
                is_ctrl,
                np.minimum(1.0, self.params.c3 * np.log2(k) / k),
                np.minimum(1.0, 1.0 / k),
            )
            coins = self.coin_rng.random(m)
            chosen = self._p3_idx[coins < probs]
            if chosen.size:
                parts.append(chosen)
        if not parts:
            return np.empty(0, dtype=np.int64)
        if len(parts) == 1:
            return parts[0]
        return np.sort(np.concatenate(parts))

    def observe(self, slot: int, outcome: SlotOutcome) -> None:
        if not outcome.success:
            return
        self._remove_winner(outcome)
        self._stale = True
        par = slot & 1
        p1 = self._alive & (self._phase == 1)
        p2 = self._alive & (self._phase == 2) & ((self._anchor & 1) == par)
        p3 = self._alive & (self._phase == 3) & (((self._anchor + 1) & 1) == par)
        idx1 = np.flatnonzero(p1)
        if idx1.size:
            self._phase[idx1] = 2
            self._anchor[idx1] = slot + 1
            self._next_send[idx1] = _SENTINEL
            for i in idx1:
                self._rest[i] = ()
                self._p2_start[int(i)] = slot + 1
        idx2 = np.flatnonzero(p2)
        if idx2.size:
            self._phase[idx2] = 3
            self._anchor[idx2] = slot
            self._next_send[idx2] = _SENTINEL
            for i in idx2:
                self._rest[i] = ()
        idx3 = np.flatnonzero(p3)
        if idx3.size:
            self._anchor[idx3] = slot

    def p2_starts(self) -> dict:
        return dict(self._p2_start)


def build_population(spec: dict, *, params: ParamSet, g: RateFunction, seed: int):
    """Build the population for a named protocol spec.

    Specs:
      {"name": "three_phase"}
      {"name": "bexp"}
      {"name": "batch", "h": {"kind": "data" | "ctrl" | "constant", ...}}
      {"name": "fixed", "schedule": {"kind": "harmonic" | "constant" | "table", ...},
       "after_success": "restart" | "continue"}
    """
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"protocol spec must be a dict with a 'name': {spec!r}")
    name = spec["name"]
    if name == "three_phase":
        return ThreePhasePopulation(params, g, seed)
    if name == "bexp":
        return BatchPopulation("data", seed, params)
    if name == "batch":
        h = spec.get("h")
        if not isinstance(h, dict) or "kind" not in h:
            raise ConfigError("batch protocol needs an 'h' spec with a 'kind'")
        return BatchPopulation(h["kind"], seed, params, h_value=float(h.get("value", 1.0)))
    if name == "fixed":
        sched = spec.get("schedule")
        if not isinstance(sched, dict) or "kind" not in sched:
            raise ConfigError("fixed protocol needs a 'schedule' spec with a 'kind'")
        return FixedSchedulePopulation(
            sched["kind"],
            seed,
            value=float(sched.get("value", 0.5)),
            values=tuple(float(v) for v in sched.get("values", ())),
            after_success=spec.get("after_success", "restart"),
        )
    raise ConfigError(f"unknown protocol name {name!r}")


def batch_survival_trial(n: int, slots: int, seed: int) -> int:
    """How many of n synchronized 1/k-batch senders outlive `slots` slots.

    Tracks only the active count: with m senders left at step k, each
    broadcasting independently with probability p = min(1, 1/k), the slot
    delivers a message with probability m*p*(1-p)^(m-1), and one sender
    leaves when it does.  This is the same success/departure law as the
    full engine (sender identities never influence the count process), so
    size-10^4 batches run in O(slots) instead of O(n*slots).
    """
    if n < 1 or slots < 1:
        raise ValueError("need n >= 1 and slots >= 1")
    u = rng_stream(seed, "batch-survival").random(slots)
    m = n
    for k in range(1, slots + 1):
        if m == 0:
            break
        p = 1.0 / k
        if u[k - 1] < m * p * (1.0 - p) ** (m - 1):
            m -= 1
    return m
