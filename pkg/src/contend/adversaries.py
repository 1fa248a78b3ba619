"""Adversary strategies: jamming schedules and node-arrival workloads.

A strategy is a per-trial object whose act(slot, history) returns the
slot's AdversaryAction before any broadcast happens; history holds only
the per-slot outcomes already delivered on the channel, i.e. exactly the
feedback the nodes themselves see.  The named attack strategies
(lemma4, theorem3, theorem5) and the scripted workloads are oblivious:
their whole schedule is fixed at construction from (seed, parameters),
so replaying one against a different protocol emits the identical
schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ParamSet, rng_stream
from .engine import ConfigError, Trace

__all__ = [
    "ADVERSARY_NAMES",
    "AdversaryAction",
    "BudgetLedger",
    "adv_adaptive_probe",
    "adv_lemma4_contention",
    "adv_none",
    "adv_random_jam",
    "adv_smooth",
    "adv_theorem3",
    "adv_theorem5",
    "build_adversary",
    "smooth_audit",
]

ADVERSARY_NAMES = ("none", "random_jam", "lemma4", "theorem3", "theorem5", "smooth", "adaptive_probe")


@dataclass(frozen=True)
class AdversaryAction:
    """One slot's decision: whether to jam, and how many nodes to inject."""

    jam: bool = False
    inject_count: int = 0


class BudgetLedger:
    """Running arrival/jam counts against the f/g throughput budget.

    multipliers (cf, cg) scale the per-horizon budgets when the ledger is
    used to audit a constrained workload.
    """

    def __init__(self, horizon: int, f: Callable, g: Callable, cf: float = 1.0, cg: float = 1.0):
        if cf <= 0 or cg <= 0:
            raise ValueError("multipliers must be positive")
        self.horizon = horizon
        self.f = f
        self.g = g
        self.cf = cf
        self.cg = cg
        self.n_t = 0
        self.d_t = 0

    def record(self, action: AdversaryAction) -> None:
        self.n_t += int(action.inject_count)
        self.d_t += int(action.jam)

    def bound(self, t: int) -> float:
        return self.n_t * float(self.f(t)) + self.d_t * float(self.g(t))

    @classmethod
    def prefix_counts(cls, trace: Trace) -> tuple:
        """(arrivals, jams) cumulative per slot, recomputed from the records."""
        n = np.cumsum([len(r.injected) for r in trace.records])
        d = np.cumsum([1 if r.jammed else 0 for r in trace.records])
        return n, d

    def matches_trace(self, trace: Trace) -> bool:
        """Feed the ledger slot by slot and compare with recomputed prefixes."""
        n, d = self.prefix_counts(trace)
        self.n_t = 0
        self.d_t = 0
        for i, record in enumerate(trace.records):
            self.record(AdversaryAction(jam=record.jammed, inject_count=len(record.injected)))
            if self.n_t != int(n[i]) or self.d_t != int(d[i]):
                return False
        return True


class _Scheduled:
    """Oblivious strategy driven by precomputed jam/inject arrays (1-based)."""

    oblivious = True

    def __init__(self, jam: np.ndarray, inject: np.ndarray):
        self.jam = jam
        self.inject = inject

    def act(self, slot: int, history) -> AdversaryAction:
        return AdversaryAction(jam=bool(self.jam[slot]), inject_count=int(self.inject[slot]))


class _AdaptiveProbe:
    """Jams the slot right after every observed success, until d_max jams."""

    oblivious = False

    def __init__(self, d_max: int, inject: np.ndarray):
        self.d_max = d_max
        self.inject = inject
        self.used = 0

    def act(self, slot: int, history) -> AdversaryAction:
        jam = False
        if self.used < self.d_max and history and history[-1].success:
            jam = True
            self.used += 1
        return AdversaryAction(jam=jam, inject_count=int(self.inject[slot]))


def _script_counts(spec: Optional[dict], horizon: int, rng: np.random.Generator) -> np.ndarray:
    """Arrival script -> per-slot injection counts (index 0 unused)."""
    counts = np.zeros(horizon + 1, dtype=np.int64)
    if spec is None:
        return counts
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"arrival script must be a dict with a 'kind': {spec!r}")
    kind = spec["kind"]
    if kind == "empty":
        return counts
    if kind == "batch":
        n = int(spec.get("n", 1))
        slot = int(spec.get("slot", 1))
        if n < 0 or slot < 1:
            raise ConfigError("batch script needs n >= 0 and slot >= 1")
        if slot <= horizon:
            counts[slot] += n
        return counts
    if kind == "periodic":
        period = int(spec.get("period", 1))
        per = int(spec.get("count", 1))
        start = int(spec.get("start", 1))
        end = int(spec.get("end", horizon))
        if period < 1 or per < 0 or start < 1:
            raise ConfigError("periodic script needs period >= 1, count >= 0, start >= 1")
        counts[start : min(end, horizon) + 1 : period] += per
        return counts
    if kind == "uniform":
        n = int(spec.get("n", 0))
        low = int(spec.get("low", 1))
        high = int(spec.get("high", horizon))
        if n < 0 or low < 1 or high < low:
            raise ConfigError("uniform script needs n >= 0 and 1 <= low <= high")
        high = min(high, horizon)
        slots = rng.integers(low, high + 1, size=n)
        np.add.at(counts, slots, 1)
        return counts
    raise ConfigError(f"unknown arrival script kind {kind!r}")


def adv_none(horizon: int, seed: int, script: Optional[dict] = None) -> _Scheduled:
    """Never jams; injects only per the fixed arrival script."""
    rng = rng_stream(seed, "adv")
    return _Scheduled(np.zeros(horizon + 1, dtype=bool), _script_counts(script, horizon, rng))


def adv_random_jam(horizon: int, seed: int, rate: float, script: Optional[dict] = None) -> _Scheduled:
    """Jams each slot independently with the given probability."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"jam rate must be in [0, 1], got {rate}")
    rng = rng_stream(seed, "adv")
    jam = np.zeros(horizon + 1, dtype=bool)
    jam[1:] = rng.random(horizon) < rate
    return _Scheduled(jam, _script_counts(script, horizon, rng))


def adv_lemma4_contention(horizon: int, seed: int, x1: float, h: Callable) -> _Scheduled:
    """Contention flood: heavy early batches plus uniform stragglers, no jams.

    Injects ceil(3*log2(t)/x1) nodes in each of the first floor(sqrt(t))
    slots, and floor(t/(2*h(t))) more nodes at independently uniform slots
    of [1, t] (several may share a slot).
    """
    if not 0.0 < x1 <= 1.0:
        raise ConfigError(f"x1 must be in (0, 1], got {x1}")
    if horizon < 4:
        raise ConfigError(f"lemma4 workload needs horizon >= 4, got {horizon}")
    rng = rng_stream(seed, "adv")
    inject = np.zeros(horizon + 1, dtype=np.int64)
    per_slot = math.ceil(3.0 * math.log2(horizon) / x1)
    head = math.isqrt(horizon)
    inject[1 : head + 1] += per_slot
    stragglers = int(horizon / (2.0 * float(h(horizon))))
    if stragglers:
        slots = rng.integers(1, horizon + 1, size=stragglers)
        np.add.at(inject, slots, 1)
    return _Scheduled(np.zeros(horizon + 1, dtype=bool), inject)


def adv_theorem3(horizon: int, seed: int, g: Callable) -> _Scheduled:
    """One early node; jams a prefix, the last slot, and random later slots.

    Jams slots 1..floor(t/(4g(t))), slot t, and floor(t/(4g(t))) further
    distinct slots drawn uniformly from (t/(4g(t)), t]; injects a single
    node at slot 1.  Total jams never exceed t/(2g(t)) + 1.
    """
    if horizon < 8:
        raise ConfigError(f"theorem3 workload needs horizon >= 8, got {horizon}")
    gt = float(g(horizon))
    if gt < 1.0:
        raise ConfigError(f"theorem3 workload needs g(t) >= 1, got {gt}")
    rng = rng_stream(seed, "adv")
    m = int(horizon / (4.0 * gt))
    jam = np.zeros(horizon + 1, dtype=bool)
    jam[1 : m + 1] = True
    jam[horizon] = True
    if m:
        extra = rng.choice(np.arange(m + 1, horizon + 1), size=m, replace=False)
        jam[extra] = True
    inject = np.zeros(horizon + 1, dtype=np.int64)
    inject[1] = 1
    return _Scheduled(jam, inject)


def adv_theorem5(horizon: int, seed: int, f: Callable, g: Callable) -> _Scheduled:
    """Prefix-and-last-slot jamming with a 2-node start and a final flood.

    Jams slots 1..floor(t/(4g(t))) and slot t; injects 2 nodes at slot 1
    and floor(t/(4f(t))) nodes at slot t.  Fully deterministic.
    """
    if horizon < 8:
        raise ConfigError(f"theorem5 workload needs horizon >= 8, got {horizon}")
    m = int(horizon / (4.0 * float(g(horizon))))
    jam = np.zeros(horizon + 1, dtype=bool)
    jam[1 : m + 1] = True
    jam[horizon] = True
    inject = np.zeros(horizon + 1, dtype=np.int64)
    inject[1] = 2
    inject[horizon] += int(horizon / (4.0 * float(f(horizon))))
    return _Scheduled(jam, inject)


def smooth_audit(jam: np.ndarray, inject: np.ndarray, horizon: int, f: Callable, g: Callable, cf: float, cg: float):
    """Check every suffix [t-j, t] against its arrival and jam budgets.

    Returns (ok, first_bad_j); a schedule passes iff arrivals in every
    suffix of length j+1 stay within cf*j/f(j) and jams within cg*j/g(j).
    """
    t = horizon
    if t < 2:
        return True, None
    suffix_arr = np.cumsum(inject[1:][::-1])  # suffix_arr[j] = arrivals in [t-j, t]
    suffix_jam = np.cumsum(jam[1:][::-1].astype(np.int64))
    js = np.arange(1, t, dtype=np.float64)
    bound_arr = cf * js / np.asarray(f(js), dtype=np.float64)
    bound_jam = cg * js / np.asarray(g(js), dtype=np.float64)
    ok_arr = suffix_arr[1:t] <= bound_arr + 1e-9
    ok_jam = suffix_jam[1:t] <= bound_jam + 1e-9
    ok = ok_arr & ok_jam
    if bool(np.all(ok)):
        return True, None
    return False, int(np.flatnonzero(~ok)[0] + 1)


def adv_smooth(horizon: int, seed: int, f: Callable, g: Callable, cf: float, cg: float) -> _Scheduled:
    """Randomized workload kept smooth on every suffix, by construction.

    Walking slots from t down to 1, an arrival (or jam) is placed with a
    density targeting the full-window budget, but only while the count
    already placed in [s, t] stays within the tightest budget of any
    suffix that will contain slot s.  A post-hoc audit re-checks all t-1
    suffix constraints and refuses to hand over a violating schedule.
    """
    if cf < 0 or cg < 0:
        raise ConfigError("smooth multipliers must be nonnegative")
    t = horizon
    rng = rng_stream(seed, "adv")
    inject = np.zeros(t + 1, dtype=np.int64)
    jam = np.zeros(t + 1, dtype=bool)
    if t >= 2 and (cf > 0 or cg > 0):
        js = np.arange(1, t, dtype=np.float64)
        budget_arr = np.floor(cf * js / np.asarray(f(js), dtype=np.float64)).astype(np.int64)
        budget_jam = np.floor(cg * js / np.asarray(g(js), dtype=np.float64)).astype(np.int64)
        # tightest budget over all suffixes of length >= j
        min_arr = np.minimum.accumulate(budget_arr[::-1])[::-1]
        min_jam = np.minimum.accumulate(budget_jam[::-1])[::-1]
        rate_arr = min(1.0, cf / float(f(t))) if cf > 0 else 0.0
        rate_jam = min(1.0, cg / float(g(t))) if cg > 0 else 0.0
        u_arr = rng.random(t)
        u_jam = rng.random(t)
        placed_arr = placed_jam = 0
        for s in range(t, 0, -1):
            j = max(t - s, 1)
            if placed_arr < min_arr[j - 1] and u_arr[s - 1] < rate_arr:
                inject[s] = 1
                placed_arr += 1
            if placed_jam < min_jam[j - 1] and u_jam[s - 1] < rate_jam:
                jam[s] = True
                placed_jam += 1
    ok, bad_j = smooth_audit(jam, inject, t, f, g, cf, cg)
    if not ok:
        raise ConfigError(f"smooth workload audit failed at suffix length j={bad_j}")
    return _Scheduled(jam, inject)


def adv_adaptive_probe(horizon: int, seed: int, d_max: int, script: Optional[dict] = None) -> _AdaptiveProbe:
    """Feedback-driven example strategy: jam right after each heard success."""
    if d_max < 0:
        raise ConfigError(f"d_max must be >= 0, got {d_max}")
    rng = rng_stream(seed, "adv")
    return _AdaptiveProbe(d_max, _script_counts(script, horizon, rng))


def dump_schedule(strategy, path) -> None:
    """Write an oblivious strategy's full (slot, jam, inject) schedule for audit."""
    if not getattr(strategy, "oblivious", False):
        raise ValueError("only oblivious strategies have a fixed schedule to dump")
    import json

    with open(path, "w", encoding="utf-8") as fh:
        for slot in range(1, len(strategy.jam)):
            fh.write(
                json.dumps(
                    {"slot": slot, "jam": bool(strategy.jam[slot]), "inject": int(strategy.inject[slot])},
                    sort_keys=True,
                )
                + "\n"
            )


def build_adversary(spec: dict, *, horizon: int, seed: int, params: ParamSet, f: Callable, g: Callable):
    """Build the strategy for a named adversary spec.

    Specs:
      {"name": "none", "script": {...}}
      {"name": "random_jam", "rate": p, "script": {...}}
      {"name": "lemma4", "x1": p, "h": {rate function spec}}
      {"name": "theorem3"}                      (uses the configured g)
      {"name": "theorem5"}                      (uses the configured f and g)
      {"name": "smooth", "cf": x, "cg": x}      (uses the configured f and g)
      {"name": "adaptive_probe", "d_max": n, "script": {...}}
    """
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"adversary spec must be a dict with a 'name': {spec!r}")
    name = spec["name"]
    if name == "none":
        return adv_none(horizon, seed, spec.get("script"))
    if name == "random_jam":
        return adv_random_jam(horizon, seed, float(spec.get("rate", 0.0)), spec.get("script"))
    if name == "lemma4":
        from .core import RateFunction

        h_spec = spec.get("h", {"kind": "constant", "value": 16.0})
        return adv_lemma4_contention(horizon, seed, float(spec.get("x1", 1.0)), RateFunction.from_spec(h_spec))
    if name == "theorem3":
        return adv_theorem3(horizon, seed, g)
    if name == "theorem5":
        return adv_theorem5(horizon, seed, f, g)
    if name == "smooth":
        return adv_smooth(horizon, seed, f, g, float(spec.get("cf", 1.0)), float(spec.get("cg", 1.0)))
    if name == "adaptive_probe":
        return adv_adaptive_probe(horizon, seed, int(spec.get("d_max", 0)), spec.get("script"))
    raise ConfigError(f"unknown adversary name {name!r}")
