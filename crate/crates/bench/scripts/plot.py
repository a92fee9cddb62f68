#!/usr/bin/env python3
"""Plot the report.csv files written by `bench`.

    python3 plot.py bench-out

writes one PNG next to each report.csv. Needs matplotlib.
"""

import csv
import statistics
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SCHEMA_VERSION = "1"


def load(path):
    series = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["schema_version"] != SCHEMA_VERSION:
                sys.exit(f"{path}: schema {row['schema_version']}, expected {SCHEMA_VERSION}")
            series[row["series"]][int(row["param"])].append(row)
    return series


def medians(points, column):
    params = sorted(points)
    return params, [statistics.median(float(r[column]) for r in points[p]) / 1e3 for p in params]


def read_latency(series, ax):
    params, med = medians(series["get_policy"], "latency_ns")
    ax.plot(params, med, "o-")
    ax.set_xscale("log")
    ax.set_xlabel("policies in state")
    ax.set_ylabel("median get_policy latency (µs)")
    ax.set_ylim(bottom=0)


def write_latency(series, ax):
    params, med = medians(series["add_user"], "latency_ns")
    ax.plot(params, med, "o-")
    ax.set_xlabel("required endorsers")
    ax.set_ylabel("median add-user latency (µs)")


def chain_size(series, ax):
    tx = series["tx_count"]
    params = sorted(tx)
    ax.plot(params, [int(tx[p][0]["bytes"]) / 1e6 for p in params], "o-", label="chain size (MB)")
    ax.set_xlabel("transactions")
    ax.set_ylabel("MB")
    ax.legend(loc="upper left")
    if "endorsers" in series:
        end = series["endorsers"]
        ks = sorted(end)
        twin = ax.twiny()
        twin.plot(ks, [int(end[k][0]["bytes"]) / int(end[k][0]["ops"]) / 1e3 for k in ks], "s--", color="C1")
        twin.set_xlabel("endorsers (dashed: kB per transaction)")


def trie_cdf(series, ax):
    for name in ("fast_path", "slow_path"):
        for param, rows in sorted(series.get(name, {}).items()):
            xs = sorted(float(r["latency_ns"]) / 1e3 for r in rows)
            ys = [(i + 1) / len(xs) for i in range(len(xs))]
            ax.step(xs, ys, where="post", label=f"{name} {param}")
    ax.set_xscale("log")
    ax.set_xlabel("request latency (µs)")
    ax.set_ylabel("CDF")
    ax.legend()


PLOTS = {
    "read_latency": read_latency,
    "write_latency": write_latency,
    "chain_size": chain_size,
    "trie_cdf": trie_cdf,
}


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "bench-out")
    for report in sorted(root.glob("*/report.csv")):
        plot = PLOTS.get(report.parent.name)
        if plot is None:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        plot(load(report), ax)
        ax.set_title(report.parent.name)
        fig.tight_layout()
        out = report.with_suffix(".png")
        fig.savefig(out, dpi=120)
        print(out)


if __name__ == "__main__":
    main()
