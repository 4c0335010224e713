"""Plot the output of ``tdho synchronize``: q(t) against Q(τ).

Usage: python3 docs/plot_synchronize.py OUT_DIR   (needs matplotlib)
"""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def main(out_dir):
    with open(Path(out_dir) / "synchronize.csv") as fh:
        rows = list(csv.DictReader(fh))
    col = {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6))
    ax1.plot(col["t"], col["Q"] / np.sqrt(col["h"]))
    ax1.set_xlabel("t")
    ax1.set_ylabel("q = eta Q")
    ax2.plot(col["tau"], col["Q"])
    ax2.set_xlabel("tau")
    ax2.set_ylabel("Q")
    fig.tight_layout()
    fig.savefig(Path(out_dir) / "synchronize.png", dpi=120)


if __name__ == "__main__":
    main(sys.argv[1])
