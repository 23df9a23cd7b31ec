"""Plot |witness| against tau from a ``qeewitness sweep-tau`` CSV, one curve per temperature.

    qeewitness sweep-tau --out sweep.csv
    python3 scripts/plot_sweep.py sweep.csv sweep.png

Needs matplotlib (``pip install .[plot]``).
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    curves = defaultdict(lambda: ([], []))
    with open(path) as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for r in rows:
            taus, vals = curves[float(r["temperature_K"])]
            taus.append(float(r["tau_ps"]))
            vals.append(float(r["abs_delta"]))
    return dict(sorted(curves.items()))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("csv")
    parser.add_argument("png")
    args = parser.parse_args(argv)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for T, (taus, vals) in load(args.csv).items():
        ax.plot(taus, vals, label=f"T = {T:g} K")
    ax.set_xlabel(r"$\tau$ (ps)")
    ax.set_ylabel(r"$|\Delta\rho^{01}|$")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.png, dpi=150)


if __name__ == "__main__":
    main()
