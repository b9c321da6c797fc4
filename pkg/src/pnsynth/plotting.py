"""Report figures.  Uses the non-interactive Agg backend; every function writes one file."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_synthesis(rows: Sequence[dict], path) -> Path:
    """Two-qubit gates per Pauli against rotation count, one line per (cmap, runs)."""
    series = defaultdict(list)
    for r in rows:
        if r.get("count2q_per_pauli") is not None:
            series[(r["cmap"], r["paulis"], r["runs"])].append((r["m"], r["count2q_per_pauli"], r.get("ms_per_pauli")))
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for (cm, mode, runs), pts in sorted(series.items()):
        pts.sort()
        label = f"{cm} {mode} RL_{runs}"
        ax1.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
        ax2.plot([p[0] for p in pts], [p[2] for p in pts], marker="o", label=label)
    ax1.set_xlabel("rotations")
    ax1.set_ylabel("2q gates per Pauli")
    ax2.set_xlabel("rotations")
    ax2.set_ylabel("ms per Pauli")
    if series:
        ax1.legend(fontsize=7)
    return _save(fig, path)


def plot_scaling(rows: Sequence[dict], fit: dict, path) -> Path:
    """Optimization wall time against output two-qubit count, with the least-squares line."""
    x = [r["count2q_after"] for r in rows]
    y = [r["wall_time_s"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(x, y, s=14)
    if x:
        lo, hi = min(x), max(x)
        ax.plot([lo, hi], [fit["slope"] * lo + fit["intercept"], fit["slope"] * hi + fit["intercept"]],
                color="C1", label=f"R² = {fit['r2']:.3f}")
        ax.legend()
    ax.set_xlabel("output 2q gates")
    ax.set_ylabel("wall time (s)")
    return _save(fig, path)


def plot_training(records: Sequence[dict], path) -> Path:
    it = [r["iteration"] for r in records]
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.plot(it, [r["d_c"] for r in records], color="C0")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("d_C", color="C0")
    ax2 = ax1.twinx()
    ax2.plot(it, [r["window_success"] for r in records], color="C1", alpha=0.7)
    ax2.set_ylabel("window success", color="C1")
    ax2.set_ylim(0, 1.02)
    return _save(fig, path)


def plot_ratios(report_rows: Sequence[dict], path) -> Path:
    """Per-block before/after two-qubit counts from an optimization report."""
    done = [r for r in report_rows if r.get("after")]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter([r["before"]["count2q"] for r in done], [r["after"]["count2q"] for r in done], s=12)
    top = max([r["before"]["count2q"] for r in done], default=1)
    ax.plot([0, top], [0, top], color="grey", lw=0.8)
    ax.set_xlabel("block 2q gates before")
    ax.set_ylabel("block 2q gates after")
    return _save(fig, path)
