"""Slotted multiple-access channel engine.

One trial drives a population of protocol nodes against an adversary for
a fixed horizon.  Each slot, in order: the adversary picks an action from
past feedback only, injected nodes activate (and may broadcast in the
same slot), every active node decides to broadcast or idle, the channel
resolves, and the outcome is delivered identically to every node and to
the adversary.  A node leaves the moment its own message goes through.

There is no collision detection anywhere: silence, collisions, and
jammed slots all read back as the same NoSuccess feedback, for nodes and
adversary alike.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core import MAX_SEED, ParamSet, RateFunction, eval_f

__all__ = [
    "ConfigError",
    "NO_SUCCESS",
    "SlotOutcome",
    "SlotRecord",
    "Trace",
    "TraceFormatError",
    "resolve_slot",
    "run_trial",
    "single_slot_success_prob",
]


class ConfigError(ValueError):
    """Invalid protocol/adversary/experiment configuration."""


class TraceFormatError(ValueError):
    """A trace file or trace structure violates its invariants."""


@dataclass(frozen=True)
class SlotOutcome:
    """Channel feedback for one slot: Success(winner) or NoSuccess.

    These are the only two observable variants; nothing in the feedback
    distinguishes silence from collision from jamming.
    """

    winner: Optional[int] = None

    @property
    def success(self) -> bool:
        return self.winner is not None

    def __repr__(self) -> str:
        return f"Success({self.winner})" if self.success else "NoSuccess"


NO_SUCCESS = SlotOutcome(None)


def resolve_slot(broadcasters: Iterable[int], jammed: bool) -> SlotOutcome:
    """Resolve one slot: success iff exactly one broadcaster and no jam."""
    if jammed:
        return NO_SUCCESS
    ids = broadcasters if isinstance(broadcasters, (set, frozenset)) else set(broadcasters)
    if len(ids) == 1:
        return SlotOutcome(next(iter(ids)))
    return NO_SUCCESS


def single_slot_success_prob(probs: Iterable[float]) -> float:
    """Exact probability that exactly one of n independent senders transmits.

    Analytic oracle sum_i p_i * prod_{j != i} (1 - p_j), used to
    cross-check the channel simulation.
    """
    p = np.asarray(list(probs), dtype=np.float64)
    if p.size == 0:
        return 0.0
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    certain = int(np.count_nonzero(p == 1.0))
    if certain >= 2:
        return 0.0
    if certain == 1:
        return float(np.prod(1.0 - p[p < 1.0]))
    silent = np.prod(1.0 - p)
    return float(silent * np.sum(p / (1.0 - p)))


@dataclass(frozen=True)
class SlotRecord:
    """Everything that happened in one slot."""

    slot: int
    broadcasters: frozenset
    jammed: bool
    injected: tuple
    outcome: SlotOutcome
    active_count: int

    def validate(self) -> None:
        ok_success = self.outcome.success == (len(self.broadcasters) == 1 and not self.jammed)
        if not ok_success:
            raise TraceFormatError(
                f"slot {self.slot}: outcome {self.outcome!r} inconsistent with "
                f"{len(self.broadcasters)} broadcaster(s), jammed={self.jammed}"
            )
        if self.outcome.success and self.outcome.winner not in self.broadcasters:
            raise TraceFormatError(f"slot {self.slot}: winner is not a broadcaster")
        if self.active_count < len(self.broadcasters):
            raise TraceFormatError(f"slot {self.slot}: active_count below broadcaster count")


@dataclass
class Trace:
    """Ordered slot records for one trial plus node lifecycle metadata.

    arrivals maps node id -> arrival slot; departures maps node id ->
    success slot (absent while still active at the end); p2_start maps
    node id -> slot at which the node began the second protocol phase
    (three-phase runs only; used by the interval analytics).
    """

    records: list
    arrivals: dict
    departures: dict
    horizon: int
    p2_start: dict = field(default_factory=dict)
    config: Optional[dict] = None
    seed: Optional[int] = None

    def success_slots(self) -> list:
        return [r.slot for r in self.records if r.outcome.success]

    def to_jsonl(self) -> str:
        lines = [
            _dump(
                {
                    "record": "header",
                    "schema_version": 1,
                    "seed": self.seed,
                    "horizon": self.horizon,
                    "config": self.config,
                }
            )
        ]
        for r in self.records:
            lines.append(
                _dump(
                    {
                        "record": "slot",
                        "slot": r.slot,
                        "broadcasters": sorted(r.broadcasters),
                        "jammed": r.jammed,
                        "injected": list(r.injected),
                        "outcome": r.outcome.winner,
                        "active_count": r.active_count,
                    }
                )
            )
        lines.append(_dump({"record": "meta", "p2_start": {str(k): v for k, v in sorted(self.p2_start.items())}}))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise TraceFormatError("empty trace file")
        header = _parse_line(lines[0], 1)
        if header.get("record") != "header":
            raise TraceFormatError("line 1: expected header record")
        horizon = header.get("horizon")
        if not isinstance(horizon, int) or horizon < 1:
            raise TraceFormatError("line 1: header missing positive horizon")
        records = []
        arrivals: dict = {}
        departures: dict = {}
        p2_start: dict = {}
        expected_slot = 1
        for lineno, line in enumerate(lines[1:], start=2):
            obj = _parse_line(line, lineno)
            kind = obj.get("record")
            if kind == "meta":
                p2_start = {int(k): int(v) for k, v in obj.get("p2_start", {}).items()}
                continue
            if kind != "slot":
                raise TraceFormatError(f"line {lineno}: unknown record kind {kind!r}")
            for key in ("slot", "broadcasters", "jammed", "injected", "outcome", "active_count"):
                if key not in obj:
                    raise TraceFormatError(f"line {lineno}: slot record missing field {key!r}")
            if obj["slot"] != expected_slot:
                raise TraceFormatError(f"line {lineno}: expected slot {expected_slot}, found {obj['slot']}")
            winner = obj["outcome"]
            rec = SlotRecord(
                slot=obj["slot"],
                broadcasters=frozenset(obj["broadcasters"]),
                jammed=bool(obj["jammed"]),
                injected=tuple(obj["injected"]),
                outcome=SlotOutcome(winner) if winner is not None else NO_SUCCESS,
                active_count=obj["active_count"],
            )
            try:
                rec.validate()
            except TraceFormatError as exc:
                raise TraceFormatError(f"line {lineno}: {exc}") from None
            for node in rec.injected:
                if node in arrivals:
                    raise TraceFormatError(f"line {lineno}: node {node} injected twice")
                arrivals[node] = rec.slot
            if rec.outcome.success:
                departures[rec.outcome.winner] = rec.slot
            records.append(rec)
            expected_slot += 1
        if expected_slot != horizon + 1:
            raise TraceFormatError(
                f"trace ends at slot {expected_slot - 1} but header declares horizon {horizon}"
            )
        return cls(
            records=records,
            arrivals=arrivals,
            departures=departures,
            horizon=horizon,
            p2_start=p2_start,
            config=header.get("config"),
            seed=header.get("seed"),
        )

    @classmethod
    def load(cls, path) -> "Trace":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())


def _dump(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _parse_line(line: str, lineno: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"line {lineno}: not valid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise TraceFormatError(f"line {lineno}: record is not an object")
    return obj


def run_trial(
    protocol: dict,
    adversary: dict,
    horizon: int,
    seed: int,
    *,
    params: Optional[ParamSet] = None,
    g: Optional[RateFunction] = None,
    f=None,
) -> Trace:
    """Run one seeded trial and return its full Trace.

    protocol and adversary are named specs (see protocols.build_population
    and adversaries.build_adversary).  params and g parameterize the
    three-phase protocol and the budgeted adversaries; f defaults to the
    curve derived from (params, g).
    """
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    if not (0 <= seed <= MAX_SEED):
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    params = params if params is not None else ParamSet()
    g = g if g is not None else RateFunction(kind="constant", value=16.0)
    if f is None:
        f = _derived_f(params, g)

    from . import adversaries as _adversaries
    from . import protocols as _protocols

    population = _protocols.build_population(protocol, params=params, g=g, seed=seed)
    strategy = _adversaries.build_adversary(adversary, horizon=horizon, seed=seed, params=params, f=f, g=g)

    records: list = []
    history: list = []
    arrivals: dict = {}
    departures: dict = {}
    id_pool: list = []  # shared int objects so records reference, not copy
    next_id = 0

    for slot in range(1, horizon + 1):
        action = strategy.act(slot, history)
        count = int(action.inject_count)
        if count < 0:
            raise ConfigError(f"adversary injected a negative count at slot {slot}")
        if count:
            id_pool.extend(range(next_id, next_id + count))
            injected = tuple(id_pool[next_id : next_id + count])
            next_id += count
            for node in injected:
                arrivals[node] = slot
            population.add(injected, slot)
        else:
            injected = ()
        sender_idx = population.senders(slot)
        broadcasters = frozenset(id_pool[i] for i in sender_idx)
        outcome = resolve_slot(broadcasters, action.jam)
        records.append(
            SlotRecord(
                slot=slot,
                broadcasters=broadcasters,
                jammed=bool(action.jam),
                injected=injected,
                outcome=outcome,
                active_count=population.alive_count,
            )
        )
        history.append(outcome)
        population.observe(slot, outcome)
        if outcome.success:
            departures[outcome.winner] = slot

    config = {
        "protocol": protocol,
        "adversary": adversary,
        "params": params.to_dict(),
        "g": g.to_spec(),
        "horizon": horizon,
    }
    return Trace(
        records=records,
        arrivals=arrivals,
        departures=departures,
        horizon=horizon,
        p2_start=population.p2_starts(),
        config=config,
        seed=seed,
    )


def _derived_f(params: ParamSet, g: RateFunction):
    def f(x):
        return eval_f(params, g, x)

    return f
