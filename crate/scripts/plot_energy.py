#!/usr/bin/env python3
"""Plot accumulated drone and ground energy from `skyheal sweep` output.

    skyheal sweep --users 4..10 --trials 10 --profile near-capacity --out sweep.csv
    python3 scripts/plot_energy.py sweep.csv -o energy.png
"""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("sweep_csv")
    ap.add_argument("-o", "--output", default="energy.png")
    args = ap.parse_args()

    with open(args.sweep_csv, newline="") as f:
        rows = list(csv.DictReader(f))
    users = [int(r["users"]) for r in rows]
    dbs = [float(r["mean_dbs_energy_j"]) / 1e3 for r in rows]
    gbs = [float(r["mean_gbs_energy_j"]) / 1e3 for r in rows]
    drones = [float(r["mean_active_drones"]) for r in rows]

    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.38
    ax.bar([u - width / 2 for u in users], dbs, width, label="drones")
    ax.bar([u + width / 2 for u in users], gbs, width, label="ground stations")
    ax.set_xlabel("stranded users")
    ax.set_ylabel("accumulated energy (kJ)")
    ax.set_yscale("log")
    ax.set_xticks(users)

    ax2 = ax.twinx()
    ax2.plot(users, drones, "k.-", label="active drones")
    ax2.set_ylabel("mean active drones per block")
    ax2.set_ylim(bottom=0)

    handles = ax.get_legend_handles_labels()[0] + ax2.get_legend_handles_labels()[0]
    ax.legend(handles, [h.get_label() for h in handles], loc="upper left")
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
