"""Plot grad_norm_sq against round for one or more metrics.csv files.

    python docs/plot_metrics.py runs/sweep/zeta2=*/metrics_mean.csv --out rate.png

Needs matplotlib, which the package itself does not depend on.
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [int(r["round"]) for r in rows], [float(r["grad_norm_sq"]) for r in rows]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv", nargs="+")
    parser.add_argument("--out", default="metrics.png")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.csv:
        rounds, values = load(path)
        ax.plot(rounds, values, label=Path(path).parent.name)
    ax.set_yscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel(r"$\|\nabla f(\bar x)\|^2$")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
