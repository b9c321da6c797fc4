"""Inference-time synthesis: best-of-n policy rollouts and a brute-force oracle."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .angles import symbols_in
from .circuit import CircuitIR, to_qasm
from .coupling import CouplingMap
from .env import SynthEnv, SynthState
from .network import PauliNetwork, networks_equivalent, normalize
from .pauli import Gate
from .policy import ActionSpaceMismatch, PolicyNet, sample

METRICS = ("count2q", "layers2q")


def metrics(gates: Sequence[Gate]) -> dict[str, int]:
    """Gate counts plus ASAP two-qubit layering (one-qubit gates do not add depth)."""
    level: dict[int, int] = {}
    count2q = count1q = layers = 0
    for g in gates:
        if g.name == "barrier":
            continue
        if g.is_2q:
            a, b = g.qubits
            lv = max(level.get(a, 0), level.get(b, 0)) + 1
            level[a] = level[b] = lv
            layers = max(layers, lv)
            count2q += 1
        else:
            count1q += 1
    return {"count2q": count2q, "layers2q": layers, "count1q": count1q, "total": count2q + count1q}


def metric_key(m: dict, metric: str = "count2q") -> tuple:
    if metric == "count2q":
        return (m["count2q"], m["layers2q"])
    if metric == "layers2q":
        return (m["layers2q"], m["count2q"])
    raise ValueError(f"unknown metric {metric!r}")


@dataclass
class SynthResult:
    n: int
    gates: list[Gate]
    success: bool
    metrics: dict = field(default_factory=dict)
    runs: int = 1
    successes: int = 0
    best_run: int | None = None
    model: str | None = None

    @property
    def circuit(self) -> CircuitIR:
        return CircuitIR(self.n, list(self.gates))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "success": self.success,
            "metrics": self.metrics,
            "runs": self.runs,
            "successes": self.successes,
            "best_run": self.best_run,
            "model": self.model,
            "qasm": to_qasm(self.circuit) if self.success else None,
        }


def check_weights(net: PolicyNet, env: SynthEnv):
    meta = net.metadata
    if meta.get("action_hash") != env.action_hash or net.config.n_actions != env.n_actions:
        raise ActionSpaceMismatch(
            f"weights for {meta.get('cmap_name')} ({meta.get('action_hash')}) do not match "
            f"coupling map {env.cmap.name} ({env.action_hash})"
        )
    if net.config.n_qubits != env.n:
        raise ActionSpaceMismatch("qubit count mismatch between weights and environment")


def _run_seeds(rng, runs: int) -> list[np.random.Generator]:
    if isinstance(rng, np.random.Generator):
        rng = int(rng.integers(0, 2**63))
    children = np.random.SeedSequence(rng).spawn(runs)
    return [np.random.default_rng(c) for c in children]


def synthesize(pn: PauliNetwork, cmap: CouplingMap, net: PolicyNet, runs: int = 1, rng=0,
               metric: str = "count2q", temperature: float = 1.0, budget: int | None = None,
               env: SynthEnv | None = None) -> SynthResult:
    """Best of ``runs`` episodes; run 0 is greedy, the rest sample at ``temperature``.

    Run ``k`` draws from its own stream derived from ``rng``, so the first
    ``k`` runs are identical whatever the total; more runs never do worse.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    env = env or SynthEnv(cmap, horizon=net.config.horizon)
    check_weights(net, env)
    s0 = env.reset(pn, budget)
    if s0.done:
        return SynthResult(pn.n, list(s0.emitted), True, metrics(s0.emitted), runs, runs, 0)
    gens = _run_seeds(rng, runs)
    states = [s0.copy() for _ in range(runs)]
    shape = (2 * env.n, 2 * env.n + env.horizon)
    obs = np.zeros((runs,) + shape, dtype=np.float32)
    active = list(range(runs))
    while active:
        for j, k in enumerate(active):
            env.observation(states[k], obs[j])
        logits, _ = net.forward(obs[: len(active)])
        still = []
        for j, k in enumerate(active):
            if k == 0:
                a = int(np.argmax(logits[j]))
            else:
                a, _ = sample(logits[j], gens[k], temperature)
            _, fin = env.step_inplace(states[k], a)
            if not fin:
                still.append(k)
        active = still
    best = None
    for k, s in enumerate(states):
        if not s.success:
            continue
        m = metrics(s.emitted)
        key = metric_key(m, metric) + (m["total"], k)
        if best is None or key < best[0]:
            best = (key, k, m)
    nsucc = sum(s.success for s in states)
    if best is None:
        return SynthResult(pn.n, [], False, {}, runs, 0, None)
    _, k, m = best
    return SynthResult(pn.n, list(states[k].emitted), True, m, runs, nsucc, k)


def verify(pn: PauliNetwork, gates: Sequence[Gate], mode: str = "replay", seed: int = 0, tol: float = 1e-9) -> bool:
    """Check that ``gates`` implement ``pn``.

    ``replay`` re-normalizes the circuit and compares networks algebraically
    (any size); ``dense`` multiplies out unitaries with random values bound
    to every parameter (small ``n`` only).
    """
    if mode == "replay":
        return networks_equivalent(pn, normalize(CircuitIR(pn.n, list(gates))), tol)
    if mode == "dense":
        from .dense import circuit_unitary, equal_up_to_phase, network_unitary

        rng = np.random.default_rng(seed)
        names = symbols_in([r.angle for r in pn.rotations]) | symbols_in(g.angle for g in gates if g.angle is not None)
        bind = {s: float(rng.uniform(-np.pi, np.pi)) for s in sorted(names)}
        return equal_up_to_phase(network_unitary(pn, bind), circuit_unitary(pn.n, gates, bind), tol)
    raise ValueError(f"unknown verification mode {mode!r}")


def _state_key(s: SynthState) -> tuple:
    return tuple(s.cols.zs), tuple(s.cols.xs), s.live


def brute_force_optimal(pn: PauliNetwork, cmap: CouplingMap, max_gates: int = 9) -> list[Gate] | None:
    """Minimum two-qubit-count (then minimum length) circuit for ``pn``, or ``None``.

    Uniform-cost search over action words with duplicate states merged; sign
    bits are left out of the state key because they never change which
    gates are needed.
    """
    if pn.n > 3:
        raise ValueError("brute force search is limited to n <= 3")
    env = SynthEnv(cmap)
    start = env.reset(pn, budget=10**9)
    if start.done:
        return list(start.emitted)
    counter = itertools.count()
    heap = [(0, 0, next(counter), start)]
    best: dict[tuple, tuple[int, int]] = {_state_key(start): (0, 0)}
    while heap:
        c2, ln, _, s = heapq.heappop(heap)
        if best.get(_state_key(s), (c2, ln)) < (c2, ln):
            continue
        if s.success:
            return list(s.emitted)
        if ln >= max_gates:
            continue
        for a, g in enumerate(env.actions):
            ns = s.copy()
            env.step_inplace(ns, a)
            cost = (c2 + (g.name == "cx"), ln + 1)
            key = _state_key(ns)
            if key in best and best[key] <= cost:
                continue
            best[key] = cost
            heapq.heappush(heap, (cost[0], cost[1], next(counter), ns))
    return None

