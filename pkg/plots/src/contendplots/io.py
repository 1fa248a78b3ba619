"""CSV loading with schema checks and input fingerprints."""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass

SUPPORTED_SCHEMA = "1"

PLOT_KINDS = ("scaling", "violation", "attack_hist")


class PlotInputError(ValueError):
    """Input CSV is missing, malformed, or lacks required columns."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: inputs, kind, output path, axis scales."""

    inputs: tuple
    kind: str
    out: str
    log_x: bool = True

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise PlotInputError(f"unknown plot kind {self.kind!r}; choose from {PLOT_KINDS}")
        if not self.inputs:
            raise PlotInputError("a plot needs at least one input CSV")


def render(spec: PlotSpec):
    """Dispatch a PlotSpec to its renderer."""
    from . import attack_hist, scaling, violation

    renderer = {
        "scaling": scaling.plot_scaling,
        "violation": violation.plot_violation,
        "attack_hist": attack_hist.plot_attack_hist,
    }[spec.kind]
    return renderer(list(spec.inputs), spec.out)


def load_rows(paths, required_columns):
    """Rows from one or more CSVs, schema-checked; fails fast on gaps."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    rows = []
    for path in paths:
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                header = reader.fieldnames or []
                missing = [c for c in ("schema_version", *required_columns) if c not in header]
                if missing:
                    raise PlotInputError(f"{path}: missing columns {missing}")
                for row in reader:
                    if row["schema_version"] != SUPPORTED_SCHEMA:
                        raise PlotInputError(
                            f"{path}: schema_version {row['schema_version']!r} unsupported "
                            f"(expected {SUPPORTED_SCHEMA})"
                        )
                    rows.append(row)
        except OSError as exc:
            raise PlotInputError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise PlotInputError(f"no data rows found in {list(paths)}")
    return rows


def fingerprint(paths) -> str:
    """sha256 of each input file, newline-joined 'name:digest' pairs."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    parts = []
    for path in paths:
        digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
        parts.append(f"{os.path.basename(path)}:{digest}")
    return "\n".join(parts)
