#!/usr/bin/env python3
"""Distance and bias sweeps of the copc-analog preset, saved as CSV and PNG.

Produces three panels:

  moment_vs_d   central-site moment against tip distance, PC and APC
  mr_vs_d       magnetoresistance against tip distance, with d* marked
  iv            total current against bias at contact and tunneling distance

Usage:
    python scripts/plot_figures.py --out figures
    python scripts/plot_figures.py --out figures --step 0.02 --no-png
"""

import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from negfspin.density import scf_moment
from negfspin.model import SPINS, Alignment
from negfspin.observables import E2_OVER_H, current, find_spin_flip, sweep_distance
from negfspin.presets import get_preset

log = logging.getLogger("plot_figures")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    log.info("wrote %s", path)


def distance_panels(setup, distances):
    sweep = sweep_distance(setup, distances, observables=("moment", "mr"))
    rows = [(d, r["moment_PC"], r["moment_APC"], r["G_PC"], r["G_APC"], r["MR"]) for d, r in sweep.rows]
    return np.array(rows, dtype=float)


def iv_panel(setup, distances, voltages, n_points):
    out = {}
    for d in distances:
        for align in Alignment:
            m = scf_moment(setup, align, d).model
            out[d, align.name] = np.array([sum(current(m, s, v, n_points) for s in SPINS) for v in voltages])
    return out


def plot(out_dir, data, flip, voltages, iv):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    d = data[:, 0]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(d, data[:, 1], "o-", ms=3, label="PC")
    ax.plot(d, data[:, 2], "s-", ms=3, label="APC")
    ax.axhline(0.0, color="grey", lw=0.6)
    if flip is not None:
        ax.axvline(flip.d_star, color="grey", ls="--", lw=0.8)
    ax.set(xlabel="tip distance d (A)", ylabel="central moment (muB)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "moment_vs_d.png", dpi=150)

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(d, data[:, 5], "o-", ms=3)
    ax.axhline(0.0, color="grey", lw=0.6)
    if flip is not None:
        ax.axvline(flip.d_star, color="grey", ls="--", lw=0.8)
    ax.set(xlabel="tip distance d (A)", ylabel="MR = (G_PC - G_APC) / G_APC")
    fig.tight_layout()
    fig.savefig(out_dir / "mr_vs_d.png", dpi=150)

    fig, axes = plt.subplots(1, len({k[0] for k in iv}), figsize=(8, 3.5))
    for ax, dist in zip(np.atleast_1d(axes), sorted({k[0] for k in iv})):
        for align in ("PC", "APC"):
            ax.plot(voltages, iv[dist, align] * E2_OVER_H * 1e6, label=align)
        ax.set(title=f"d = {dist:g} A", xlabel="bias V (V)", ylabel="I (uA)")
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / "iv.png", dpi=150)
    log.info("wrote PNG panels to %s", out_dir)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("figures"))
    ap.add_argument("--step", type=float, default=0.05, help="distance grid step (A)")
    ap.add_argument("--d-min", type=float, default=2.05)
    ap.add_argument("--d-max", type=float, default=5.0)
    ap.add_argument("--v-max", type=float, default=0.2)
    ap.add_argument("--n-bias", type=int, default=41)
    ap.add_argument("--n-points", type=int, default=200, help="energy points per current integral")
    ap.add_argument("--no-png", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    args.out.mkdir(parents=True, exist_ok=True)
    setup = get_preset("copc-analog")
    n = int(round((args.d_max - args.d_min) / args.step))
    distances = [round(args.d_min + k * args.step, 10) for k in range(n + 1)]

    data = distance_panels(setup, distances)
    write_csv(args.out / "moment_vs_d.csv", ["d", "moment_PC", "moment_APC"], data[:, :3].tolist())
    write_csv(args.out / "mr_vs_d.csv", ["d", "G_PC", "G_APC", "MR"], data[:, [0, 3, 4, 5]].tolist())

    flip = find_spin_flip(setup, Alignment.APC, args.d_min, args.d_max)
    log.info("APC spin flip: %s", f"d* = {flip.d_star:.3f} A" if flip else "none in range")

    voltages = np.linspace(-args.v_max, args.v_max, args.n_bias)
    iv = iv_panel(setup, (args.d_min, args.d_max), voltages, args.n_points)
    rows = [[v] + [iv[key][i] for key in sorted(iv)] for i, v in enumerate(voltages)]
    write_csv(args.out / "iv.csv", ["V"] + [f"I_{a}_d{d:g}" for d, a in sorted(iv)], rows)

    if not args.no_png:
        plot(args.out, data, flip, voltages, iv)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
