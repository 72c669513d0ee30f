#!/usr/bin/env python3
"""Plot gradient-norm convergence from per-iteration CSV files.

Reads one or more trace CSVs produced by ``barrierplan run`` and draws
gradient infinity norm against iteration on a log scale, one line per
file.  Needs matplotlib, which is not a package dependency.

Usage: python3 scripts/plot_convergence.py out/settle-2box-*.csv --out conv.png
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_trace(path):
    iters, grads = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            iters.append(int(row["iter"]))
            grads.append(float(row["grad_inf_norm"]))
    return iters, grads


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("traces", nargs="+", help="per-iteration CSV files")
    parser.add_argument("--out", default="convergence.png", help="output image")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.traces:
        iters, grads = read_trace(path)
        ax.semilogy(iters, grads, marker="o", markersize=3, label=Path(path).stem)
    ax.set_xlabel("iteration")
    ax.set_ylabel("gradient infinity norm")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
