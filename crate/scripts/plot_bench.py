#!/usr/bin/env python3
"""Plot convergence traces from a `dlhim bench` output directory.

usage: plot_bench.py OUT_DIR [--save DIR]

One figure per arm: relative residual per cycle for every solver, thin
lines per run and a thick median. Arms with a single solver also get the
update norm, which is how a false fixed point shows up.
"""

import argparse
import csv
import json
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def read_trace(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    res = np.array([float(r["res_norm"]) for r in rows])
    upd = np.array([float(r["upd_norm"]) for r in rows])
    return res, upd


def f_norm(csv_path):
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    return float(meta["f_norm"])


def median_curve(curves):
    length = max(len(c) for c in curves)
    padded = np.full((len(curves), length), np.nan)
    for i, c in enumerate(curves):
        padded[i, : len(c)] = c
    return np.nanmedian(padded, axis=0)


def plot_arm(arm_dir, ax):
    solvers = sorted({p.name for p in arm_dir.glob("seed*/*") if p.is_dir()})
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for color, solver in zip(colors, solvers):
        traces = sorted(arm_dir.glob(f"seed*/{solver}/inst*.csv"))
        rel, upd = [], []
        for t in traces:
            res, u = read_trace(t)
            f = f_norm(t)
            rel.append(res / f)
            upd.append(u)
            ax.semilogy(res / f, color=color, alpha=0.15, lw=0.7)
        ax.semilogy(median_curve(rel), color=color, lw=2, label=f"{solver} residual")
        if len(solvers) == 1:
            ax.semilogy(median_curve(upd), color="k", lw=2, ls="--", label="update norm")
    ax.set_xlabel("cycle")
    ax.set_ylabel("relative residual")
    ax.set_title(arm_dir.name)
    ax.legend(fontsize="small")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--save", type=Path, help="write PNGs here instead of showing")
    args = parser.parse_args()
    arms = sorted(p for p in (args.out_dir / "runs").iterdir() if p.is_dir())
    for arm in arms:
        fig, ax = plt.subplots(figsize=(6, 4))
        plot_arm(arm, ax)
        fig.tight_layout()
        if args.save:
            args.save.mkdir(parents=True, exist_ok=True)
            fig.savefig(args.save / f"{arm.name}.png", dpi=120)
            plt.close(fig)
    if not args.save:
        plt.show()


if __name__ == "__main__":
    main()
