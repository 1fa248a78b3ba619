"""First-success-time histogram from an attack's per-trial CSV."""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .io import PlotInputError, fingerprint, load_rows

REQUIRED = ("trial", "first_success")


def plot_attack_hist(csv_paths, out_path):
    """Render the histogram; returns (first-success list, no-success count)."""
    rows = load_rows(csv_paths, REQUIRED)
    firsts = [int(r["first_success"]) for r in rows if r["first_success"] != ""]
    silent = sum(1 for r in rows if r["first_success"] == "")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if firsts:
        ax.hist(firsts, bins=min(40, max(5, len(firsts) // 5)))
    ax.set_xlabel("first success slot")
    ax.set_ylabel("trials")
    ax.set_title(f"{len(firsts)} trials with a success, {silent} silent")
    fig.tight_layout()
    fig.savefig(out_path, metadata={"contend:inputs": fingerprint(csv_paths)})
    plt.close(fig)
    return firsts, silent


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="first-success-time histogram for attack runs")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True, help="attack trials CSV(s)")
    parser.add_argument("--out", required=True, help="output image path (.png)")
    args = parser.parse_args(argv)
    try:
        plot_attack_hist(args.inputs, args.out)
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
