#!/usr/bin/env python3
"""Plot backlog-vs-rate curves from a sweep CSV, with optional capacity
lines from a capacity CSV. Convenience only; not part of the tested surface.

Usage: plot_sweep.py sweep.csv [capacity.csv] [-o out.png]
"""
import argparse
import collections
import csv
import sys


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("sweep")
    ap.add_argument("capacity", nargs="?")
    ap.add_argument("-o", "--out", default="sweep.png")
    args = ap.parse_args()

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    means = collections.defaultdict(list)  # scheme -> [(theta, backlog)]
    with open(args.sweep) as fh:
        for row in csv.DictReader(fh):
            if row["seed"] == "mean":
                means[row["scheme"]].append((float(row["theta"]), float(row["backlog"])))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for scheme, points in sorted(means.items()):
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=scheme)

    if args.capacity:
        with open(args.capacity) as fh:
            for row in csv.DictReader(fh):
                ax.axvline(float(row["theta_star"]), linestyle=":", alpha=0.6)

    ax.set_xlabel("theta (rates = theta * direction)")
    ax.set_ylabel("final aggregate backlog (packets)")
    ax.set_yscale("symlog")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=160)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
