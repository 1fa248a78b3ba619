"""Scaling figure: mean successes vs horizon with a c*t/log2(t) fit.

The fit is a constant least-squares fit on the normalized column
(mean successes divided by t/log2 t), so c is the mean of that column
and the residuals are its deviations.  With fewer than two rows the fit
is skipped with a warning.
"""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import PlotInputError, fingerprint, load_rows

REQUIRED = ("horizon", "mean_successes", "norm_successes")


def fit_normalized(norms):
    """Least-squares constant fit on the normalized column: (c, residuals)."""
    arr = np.asarray(norms, dtype=np.float64)
    c = float(arr.mean())
    return c, arr - c


def plot_scaling(csv_paths, out_path):
    """Render the figure; returns (fitted c or None, residuals)."""
    rows = load_rows(csv_paths, REQUIRED)
    rows.sort(key=lambda r: int(r["horizon"]))
    horizons = np.array([int(r["horizon"]) for r in rows], dtype=np.float64)
    means = np.array([float(r["mean_successes"]) for r in rows])
    norms = np.array([float(r["norm_successes"]) for r in rows])
    stamp = fingerprint(csv_paths)

    c = None
    residuals = np.array([])
    if len(rows) >= 2:
        c, residuals = fit_normalized(norms)
    else:
        print("warning: fewer than two rows; skipping the fit", file=sys.stderr)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(horizons, means, "o-", label="mean successes")
    if c is not None:
        ref = c * horizons / np.log2(horizons)
        ax.plot(horizons, ref, "--", label=f"{c:.4g} * t / log2(t)")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("horizon t (slots)")
    ax.set_ylabel("successes")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(
        out_path,
        metadata={
            "contend:inputs": stamp,
            "contend:fit": "skipped" if c is None else repr(c),
        },
    )
    plt.close(fig)

    with open(str(out_path) + ".txt", "w", encoding="utf-8") as fh:
        fh.write("scaling fit on normalized successes (c * t / log2 t)\n")
        if c is None:
            fh.write("fit: skipped (fewer than two rows)\n")
        else:
            fh.write(f"fitted c: {c!r}\n")
            fh.write(f"max |residual|: {float(np.abs(residuals).max())!r}\n")
            for t, r in zip(horizons, residuals):
                fh.write(f"  t={int(t)}: residual {r!r}\n")
        fh.write("inputs:\n")
        for line in stamp.splitlines():
            fh.write(f"  {line}\n")
    return c, residuals


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="successes-vs-horizon scaling figure")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True, help="aggregate sweep CSV(s)")
    parser.add_argument("--out", required=True, help="output image path (.png)")
    args = parser.parse_args(argv)
    try:
        plot_scaling(args.inputs, args.out)
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
