"""Rate functions, shared constants, and the seeded-randomness contract.

Every tunable constant used by the protocols and the analyzer lives in
ParamSet, every rate curve (the jamming budget ``g``, attack knobs, user
curves) is a RateFunction, and all randomness flows through rng_stream so
that a single 64-bit seed plus a consumer label reproduces any stream
bit-for-bit.

Conventions: logarithms are base 2 throughout, and probabilities are
clamped into [0, 1] after every formula.  The send-rate curve
``f(x) = a*c2*log(x) / log^2(g(x)/a)`` has a degenerate denominator when
``g(x) <= a``; both the numerator log and the denominator log are clamped
below at ``log_floor`` (default 1) to keep f finite, positive, and
non-decreasing.  Experiment outputs record the ParamSet used, so the
clamp is always visible in results.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from typing import Union

import numpy as np

__all__ = [
    "MAX_SEED",
    "ParamSet",
    "RateFunction",
    "Seed",
    "eval_f",
    "eval_h_ctrl",
    "eval_h_data",
    "rng_stream",
]

Seed = int
MAX_SEED = 2**64 - 1

ArrayLike = Union[int, float, np.ndarray]


@dataclass(frozen=True)
class ParamSet:
    """Protocol and accounting constants.

    The algorithm leaves these open ("constants to be determined"); here
    they are plain configuration.  Defaults are desk-scale choices, not
    tuned values; every experiment records the set it ran with.

    a        scaling constant between f and the per-stage send budget f/a
    c2       numerator constant of f
    c3       numerator constant of the control-batch rate c3*log(x)/x
    c_prime  batch-duration constant (survival experiments)
    c1, c    interval-accounting constants
    t0       interval-accounting cutoff constant
    log_floor  lower clamp applied to logarithms inside f (>= 1)
    """

    a: float = 4.0
    c2: float = 1.0
    c3: float = 16.0
    c_prime: float = 8.0
    c1: float = 4.0
    c: float = 4.0
    t0: float = 64.0
    log_floor: float = 1.0

    def __post_init__(self) -> None:
        for field in fields(self):
            value = getattr(self, field.name)
            if not (isinstance(value, (int, float)) and value > 0):
                raise ValueError(f"ParamSet.{field.name} must be a positive real, got {value!r}")
        if self.t0 < 2:
            raise ValueError(f"ParamSet.t0 must be >= 2, got {self.t0}")
        if self.log_floor < 1:
            raise ValueError(f"ParamSet.log_floor must be >= 1, got {self.log_floor}")

    def to_dict(self) -> dict:
        return {field.name: float(getattr(self, field.name)) for field in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ParamSet":
        known = {field.name for field in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown ParamSet fields: {sorted(unknown)}")
        return cls(**{key: float(value) for key, value in data.items()})


@dataclass(frozen=True)
class RateFunction:
    """A positive, non-decreasing curve over the positive integers.

    Kinds:
      constant   f(x) = value
      log        f(x) = max(1, log2 x)
      poly_log   f(x) = max(1, log2 x) ** power
      table      f(x) = values[x-1], clamped to the last entry beyond it

    The log-based kinds are clamped below at 1 so every value is strictly
    positive (log2(1) = 0 would violate positivity).  Calls accept scalars
    or numpy arrays.
    """

    kind: str
    value: float = 1.0
    power: float = 1.0
    values: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "log", "poly_log", "table"):
            raise ValueError(f"unknown RateFunction kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant RateFunction needs value > 0")
        if self.kind == "poly_log" and not self.power > 0:
            raise ValueError("poly_log RateFunction needs power > 0")
        if self.kind == "table":
            if not self.values:
                raise ValueError("table RateFunction needs at least one value")
            if any(not v > 0 for v in self.values):
                raise ValueError("table RateFunction values must be positive")

    def __call__(self, x: ArrayLike) -> ArrayLike:
        scalar = np.isscalar(x)
        arr = np.asarray(x, dtype=np.float64)
        if np.any(arr < 1):
            raise ValueError("RateFunction argument must be >= 1")
        if self.kind == "constant":
            out = np.full_like(arr, self.value)
        elif self.kind == "log":
            out = np.maximum(1.0, np.log2(arr))
        elif self.kind == "poly_log":
            out = np.maximum(1.0, np.log2(arr)) ** self.power
        else:
            table = np.asarray(self.values, dtype=np.float64)
            idx = np.minimum(arr.astype(np.int64), len(table)) - 1
            out = table[idx]
        return float(out) if scalar else out

    def is_non_decreasing(self, upto: int = 10**6) -> bool:
        xs = np.arange(1, upto + 1, dtype=np.float64)
        ys = self(xs)
        return bool(np.all(np.diff(ys) >= 0))

    def to_spec(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "log":
            return {"kind": "log"}
        if self.kind == "poly_log":
            return {"kind": "poly_log", "power": self.power}
        return {"kind": "table", "values": list(self.values)}

    @classmethod
    def from_spec(cls, spec: dict) -> "RateFunction":
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ValueError(f"rate function spec must be a dict with a 'kind': {spec!r}")
        kind = spec["kind"]
        if kind == "constant":
            return cls(kind="constant", value=float(spec["value"]))
        if kind == "log":
            return cls(kind="log")
        if kind == "poly_log":
            return cls(kind="poly_log", power=float(spec.get("power", 1.0)))
        if kind == "table":
            return cls(kind="table", values=tuple(float(v) for v in spec["values"]))
        raise ValueError(f"unknown rate function kind {kind!r}")


def _as_positive(x: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 1):
        raise ValueError(f"{name} must be >= 1")
    return arr


def eval_f(params: ParamSet, g: RateFunction, x: ArrayLike) -> ArrayLike:
    """Send-rate curve a*c2*log2(x) / max(log_floor, log2(g(x)/a))^2.

    Both logs are clamped below at params.log_floor, so the result is
    strictly positive for every x >= 1.
    """
    scalar = np.isscalar(x)
    arr = _as_positive(x, "x")
    num = params.a * params.c2 * np.maximum(params.log_floor, np.log2(arr))
    den = np.maximum(params.log_floor, np.log2(np.asarray(g(arr), dtype=np.float64) / params.a)) ** 2
    out = num / den
    return float(out) if scalar else out


def eval_h_ctrl(params: ParamSet, x: ArrayLike) -> ArrayLike:
    """Control-batch send probability min(1, c3*log2(x)/x); 0 at x = 1."""
    scalar = np.isscalar(x)
    arr = _as_positive(x, "x")
    out = np.minimum(1.0, params.c3 * np.log2(arr) / arr)
    return float(out) if scalar else out


def eval_h_data(x: ArrayLike) -> ArrayLike:
    """Data-batch send probability min(1, 1/x)."""
    scalar = np.isscalar(x)
    arr = _as_positive(x, "x")
    out = np.minimum(1.0, 1.0 / arr)
    return float(out) if scalar else out


def rng_stream(seed: Seed, label: str) -> np.random.Generator:
    """Independent reproducible random stream for one consumer.

    The label ("node:17", "adv", "coins", ...) is hashed into extra
    entropy words, so distinct labels give statistically independent
    streams and the same (seed, label) pair always rebuilds the same one.
    """
    if not (0 <= seed <= MAX_SEED):
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 8], "big") for i in range(0, 32, 8)]
    return np.random.default_rng([seed, *words])
