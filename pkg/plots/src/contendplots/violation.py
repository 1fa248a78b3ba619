"""Violation figure: throughput-budget violation frequency vs jamming rate.

One line per horizon; rows without a jam_rate value (non-random-jam
adversaries) are skipped.
"""

from __future__ import annotations

import argparse
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .io import PlotInputError, fingerprint, load_rows

REQUIRED = ("horizon", "jam_rate", "violation_freq")


def plot_violation(csv_paths, out_path):
    """Render the figure; returns {horizon: [(rate, freq), ...]}."""
    rows = load_rows(csv_paths, REQUIRED)
    series = defaultdict(list)
    for row in rows:
        if row["jam_rate"] == "":
            continue
        series[int(row["horizon"])].append((float(row["jam_rate"]), float(row["violation_freq"])))
    if not series:
        raise PlotInputError("no rows with a jam_rate value; nothing to plot")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for horizon in sorted(series):
        points = sorted(series[horizon])
        ax.plot([p[0] for p in points], [p[1] for p in points], "o-", label=f"t={horizon}")
    ax.set_xlabel("jamming rate")
    ax.set_ylabel("violation frequency")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, metadata={"contend:inputs": fingerprint(csv_paths)})
    plt.close(fig)
    return dict(series)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="budget-violation frequency vs jamming rate")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True, help="aggregate sweep CSV(s)")
    parser.add_argument("--out", required=True, help="output image path (.png)")
    args = parser.parse_args(argv)
    try:
        plot_violation(args.inputs, args.out)
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
