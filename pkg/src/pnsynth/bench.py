"""Benchmark harness: native synthesis sweeps and pass-level optimization timing."""

from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .coupling import CouplingMap, line_map
from .network import PauliNetwork
from .resynth import ModelRegistry, Workflow, optimize, random_routed_circuit
from .synthesizer import synthesize, verify
from .trainer import Difficulty, random_target

SCHEMA_VERSION = 1

# Published per-Pauli averages (RL_1, RL_10) over random networks with 0-100 rotations.
REFERENCE_VALUES = {
    "4qL": {"count2q": (2.76, 2.58), "layers2q": (2.31, 2.12), "ms": (0.40, 1.79)},
    "4qT": {"count2q": (2.68, 2.48), "layers2q": (2.64, 2.45), "ms": (0.35, 1.41)},
    "5qL": {"count2q": (5.95, 5.50), "layers2q": (4.45, 4.01), "ms": (0.67, 3.14)},
    "5qT": {"count2q": (5.43, 5.02), "layers2q": (4.53, 4.14), "ms": (0.61, 2.91)},
    "6qL": {"count2q": (10.32, 9.56), "layers2q": (6.86, 6.16), "ms": (1.19, 6.15)},
    "6qT": {"count2q": (9.11, 8.40), "layers2q": (6.50, 5.84), "ms": (1.08, 5.86)},
    "6qY": {"count2q": (9.06, 8.33), "layers2q": (6.91, 6.23), "ms": (1.06, 5.16)},
}

SYNTH_COLUMNS = (
    "schema_version", "cmap", "m", "paulis", "runs", "trials", "successes", "verified",
    "count2q_mean", "layers2q_mean", "ms_mean",
    "count2q_per_pauli", "layers2q_per_pauli", "ms_per_pauli",
    "ref_count2q_per_pauli", "ref_layers2q_per_pauli", "ref_ms_per_pauli", "count2q_vs_ref",
    "status",
)

OPT_COLUMNS = (
    "schema_version", "workflow", "n_qubits", "n_gates", "seed",
    "count2q_before", "count2q_after", "layers2q_before", "layers2q_after",
    "count2q_ratio", "layers2q_ratio", "replacements", "verified", "wall_time_s",
)


def random_network(cmap: CouplingMap, m: int, rng: np.random.Generator, paulis: str = "ixyz") -> PauliNetwork:
    """``m`` random rotations behind a random Clifford word of depth ``5n``."""
    n = cmap.n_qubits
    return random_target(n, cmap, Difficulty(5 * n), rng, paulis, n_rotations=m)


def _trial_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def _reference(cmap_name: str, runs: int) -> dict:
    ref = REFERENCE_VALUES.get(cmap_name)
    if ref is None or runs not in (1, 10):
        return {}
    k = 0 if runs == 1 else 1
    return {f"ref_{key}_per_pauli": v[k] for key, v in ref.items()}


def bench_synthesis(cmaps: Sequence[CouplingMap], rotations: Iterable[int], trials: int,
                    registry: ModelRegistry, runs: Sequence[int] = (1, 10),
                    paulis: Sequence[str] = ("ixyz",), seed: int = 0) -> list[dict]:
    """One row per ``(cmap, m, pauli mode, runs)``.

    Every trial is replay-verified.  Rows with ``m == 0`` are pure Clifford
    synthesis: the per-Pauli columns stay empty and ``ms_per_pauli`` holds the
    absolute time instead.
    """
    rotations = list(rotations)
    rows = []
    for ci, cmap in enumerate(cmaps):
        sel = registry.select(cmap)
        for m in rotations:
            for pi, mode in enumerate(paulis):
                for r in runs:
                    row = {c: None for c in SYNTH_COLUMNS}
                    row.update(schema_version=SCHEMA_VERSION, cmap=cmap.name, m=m, paulis=mode,
                               runs=r, trials=trials)
                    row.update(_reference(cmap.name, r))
                    if sel is None:
                        row["status"] = "skipped: no weights"
                        rows.append(row)
                        continue
                    entry, perm = sel
                    c2, lay, ms, succ, ok = [], [], [], 0, True
                    for t in range(trials):
                        pn = random_network(cmap, m, _trial_rng(seed, ci, m, pi, t), mode)
                        target = pn.permuted(perm)
                        t0 = time.perf_counter()
                        res = synthesize(target, entry.cmap, entry.net, r, rng=[seed, ci, m, pi, t])
                        ms.append(1000 * (time.perf_counter() - t0))
                        if not res.success:
                            continue
                        succ += 1
                        ok &= verify(target, res.gates, "replay")
                        c2.append(res.metrics["count2q"])
                        lay.append(res.metrics["layers2q"])
                    row.update(successes=succ, verified=ok, ms_mean=float(np.mean(ms)) if ms else None)
                    if c2:
                        row.update(count2q_mean=float(np.mean(c2)), layers2q_mean=float(np.mean(lay)))
                    if m > 0 and c2:
                        row["count2q_per_pauli"] = row["count2q_mean"] / m
                        row["layers2q_per_pauli"] = row["layers2q_mean"] / m
                        row["ms_per_pauli"] = row["ms_mean"] / m
                        if row["ref_count2q_per_pauli"]:
                            row["count2q_vs_ref"] = row["count2q_per_pauli"] / row["ref_count2q_per_pauli"]
                    elif m == 0:
                        row["ms_per_pauli"] = row["ms_mean"]
                    if m == 0:
                        row["status"] = "pure-clifford"
                    else:
                        row["status"] = "ok" if succ else "no successes"
                    rows.append(row)
    return rows


def bench_optimize(sizes: Sequence[tuple[int, int]], workflow: Workflow, registry: ModelRegistry,
                   seed: int = 0, device_factory=line_map) -> list[dict]:
    """Optimize one random routed circuit per ``(n_qubits, n_gates)`` pair."""
    rows = []
    for i, (n, g) in enumerate(sizes):
        dev = device_factory(n)
        circ = random_routed_circuit(dev, g, _trial_rng(seed, i, n, g))
        _, rep = optimize(circ, workflow, registry, dev, seed=seed)
        rows.append({
            "schema_version": SCHEMA_VERSION, "workflow": workflow.name, "n_qubits": n, "n_gates": g,
            "seed": seed, "count2q_before": rep["before"]["count2q"], "count2q_after": rep["after"]["count2q"],
            "layers2q_before": rep["before"]["layers2q"], "layers2q_after": rep["after"]["layers2q"],
            "count2q_ratio": rep["count2q_ratio"], "layers2q_ratio": rep["layers2q_ratio"],
            "replacements": rep["replacements"], "verified": rep["verified"], "wall_time_s": rep["wall_time_s"],
        })
    return rows


def linear_fit(x: Sequence[float], y: Sequence[float]) -> dict:
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def geo_stats(ratios: Sequence[float]) -> tuple[float, float]:
    """Geometric mean and geometric standard deviation."""
    logs = np.log(np.asarray(ratios, float))
    return math.exp(logs.mean()), math.exp(logs.std())


def format_ratio(ratios: Sequence[float]) -> str:
    g, s = geo_stats(ratios)
    return f"{g:.2f} ×÷ {s:.2f}"


def write_csv(rows: list[dict], path: str | Path, columns: Sequence[str]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(columns))
        w.writeheader()
        for r in rows:
            w.writerow({c: "" if r.get(c) is None else r[c] for c in columns})


def write_jsonl(rows: Iterable[dict], path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")
