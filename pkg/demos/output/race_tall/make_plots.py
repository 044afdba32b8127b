"""Render gap-vs-CPU and gap-vs-cycles plots from plots_data.csv."""

import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = {}
with open(os.path.join(here, "plots_data.csv")) as fh:
    for row in csv.DictReader(fh):
        if not row["gap"]:
            continue
        key = row["schedule"]
        series.setdefault(key, {"cycle": [], "cpu": [], "gap": []})
        series[key]["cycle"].append(int(row["cycle"]))
        series[key]["cpu"].append(float(row["cpu_total_s"]))
        series[key]["gap"].append(float(row["gap"]))

for xkey, xlabel, fname in (("cpu", "CPU time (s)", "gap_vs_cpu.png"),
                            ("cycle", "cycle", "gap_vs_cycles.png")):
    fig, ax = plt.subplots(figsize=(7, 5))
    for label in sorted(series):
        data = series[label]
        ax.plot(data[xkey], data["gap"], label=label)
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("objective gap")
    ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(here, fname), dpi=120)
    print("wrote", fname)
