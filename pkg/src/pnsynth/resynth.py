"""Collect-and-resynthesize optimization pass for routed circuits."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import GraphMatcher

from .circuit import CircuitIR
from .coupling import CouplingMap, induced_map
from .env import SynthEnv
from .network import PauliNetwork, normalize
from .pauli import Gate
from .policy import PolicyNet, load_weights
from .synthesizer import SynthResult, metric_key, metrics, synthesize, verify

log = logging.getLogger(__name__)

MODELS_DIR = Path(__file__).parent / "models"
REGISTRY_ENV = "PNSYNTH_REGISTRY"


class MapViolation(ValueError):
    def __init__(self, index: int, gate: Gate):
        self.index, self.gate = index, gate
        super().__init__(f"gate #{index} ({gate}) acts on qubits not coupled in the device map")


@dataclass
class CircuitDag:
    """Per-qubit gate chains; ``preds``/``succs`` hold neighbour gate indices."""

    n_qubits: int
    gates: list[Gate]
    preds: list[list[int]]
    succs: list[list[int]]

    @classmethod
    def build(cls, circuit: CircuitIR) -> CircuitDag:
        last: dict[int, int] = {}
        preds = [[] for _ in circuit.gates]
        succs = [[] for _ in circuit.gates]
        for i, g in enumerate(circuit.gates):
            for q in g.qubits:
                if q in last:
                    p = last[q]
                    if p not in preds[i]:
                        preds[i].append(p)
                        succs[p].append(i)
                last[q] = i
        return cls(circuit.n_qubits, list(circuit.gates), preds, succs)


@dataclass
class Block:
    indices: list[int]
    qubits: list[int]
    barrier: bool = False

    def local_circuit(self, gates: list[Gate]) -> CircuitIR:
        index = {q: i for i, q in enumerate(self.qubits)}
        return CircuitIR(len(self.qubits), [gates[i].remap(index) for i in self.indices])


def collect(circuit: CircuitIR, max_qubits: int, direction: str = "forward") -> list[Block]:
    """Greedy depth-first block collection.

    Seeds are taken in circuit order (``forward``) or reverse order
    (``backward``).  A gate joins the growing block only once all of its
    predecessors (successors, going backward) are already placed, which keeps
    every block convex; gates that would exceed ``max_qubits`` are left to
    seed later blocks.  Blocks come back in an order that is a valid
    schedule for the forward circuit.
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, not {direction!r}")
    if max_qubits < 2:
        raise ValueError("max_qubits must be >= 2")
    dag = CircuitDag.build(circuit)
    gates = dag.gates
    order = range(len(gates)) if direction == "forward" else range(len(gates) - 1, -1, -1)
    before, after = (dag.preds, dag.succs) if direction == "forward" else (dag.succs, dag.preds)
    placed = [False] * len(gates)
    blocks = []
    for seed in order:
        if placed[seed]:
            continue
        placed[seed] = True
        if gates[seed].name == "barrier":
            blocks.append(Block([seed], sorted(gates[seed].qubits), barrier=True))
            continue
        members = [seed]
        qubits = set(gates[seed].qubits)
        stack = list(reversed(after[seed]))
        while stack:
            g = stack.pop()
            if placed[g] or gates[g].name == "barrier":
                continue
            if not all(placed[p] for p in before[g]):
                continue
            newq = qubits | set(gates[g].qubits)
            if len(newq) > max_qubits:
                continue
            placed[g] = True
            members.append(g)
            qubits = newq
            stack.extend(reversed(after[g]))
        blocks.append(Block(sorted(members), sorted(qubits)))
    if direction == "backward":
        blocks.reverse()
    return blocks


def block_graph_acyclic(circuit: CircuitIR, blocks: list[Block]) -> bool:
    """Contract every block to a node and check the quotient DAG is acyclic."""
    dag = CircuitDag.build(circuit)
    owner = {}
    for b, blk in enumerate(blocks):
        for i in blk.indices:
            owner[i] = b
    g = nx.DiGraph()
    g.add_nodes_from(range(len(blocks)))
    for i, ss in enumerate(dag.succs):
        for j in ss:
            if owner[i] != owner[j]:
                g.add_edge(owner[i], owner[j])
    return nx.is_directed_acyclic_graph(g)


@dataclass
class ModelEntry:
    net: PolicyNet
    cmap: CouplingMap
    graph: nx.Graph = field(repr=False, default=None)

    def __post_init__(self):
        if self.graph is None:
            self.graph = self.cmap.graph()


class ModelRegistry:
    """Policy weights keyed by qubit count and coupling graph."""

    def __init__(self, entries: Iterable[ModelEntry] = ()):
        self.entries = list(entries)
        self._cache: dict = {}

    def add(self, net: PolicyNet):
        cm = net.metadata["cmap"]
        self.entries.append(ModelEntry(net, CouplingMap.from_json(cm)))
        self._cache.clear()

    @classmethod
    def from_dir(cls, path: str | Path) -> ModelRegistry:
        reg = cls()
        for f in sorted(Path(path).glob("*.pnw")):
            reg.add(load_weights(f.read_bytes()))
        return reg

    @classmethod
    def default(cls) -> ModelRegistry:
        return cls.from_dir(os.environ.get(REGISTRY_ENV) or MODELS_DIR)

    @classmethod
    def stub(cls, cmaps: Iterable[CouplingMap], horizon: int = 8, seed: int = 0) -> ModelRegistry:
        """Untrained nets; useful for exercising the pass plumbing."""
        from .trainer import TrainConfig, build_net

        reg = cls()
        for cm in cmaps:
            env = SynthEnv(cm, horizon=horizon)
            reg.add(build_net(TrainConfig(cmap=cm.name, seed=seed, horizon=horizon), env))
        return reg

    def names(self) -> list[str]:
        return [e.cmap.name for e in self.entries]

    def select(self, sub: CouplingMap) -> tuple[ModelEntry, list[int]] | None:
        """Model whose coupling graph is isomorphic to ``sub``, plus the relabelling ``local -> model``."""
        key = (sub.n_qubits, frozenset(frozenset(e) for e in sub.edges))
        if key in self._cache:
            return self._cache[key]
        found = None
        g = sub.graph()
        for e in self.entries:
            if e.cmap.n_qubits != sub.n_qubits:
                continue
            gm = GraphMatcher(g, e.graph)
            iso = next(gm.isomorphisms_iter(), None)
            if iso is not None:
                found = (e, [iso[q] for q in range(sub.n_qubits)])
                break
        self._cache[key] = found
        return found


def select_model(sub: CouplingMap, registry: ModelRegistry):
    return registry.select(sub)


def synthesize_with_registry(pn: PauliNetwork, cmap: CouplingMap, registry: ModelRegistry, runs: int = 1,
                             rng=0, metric: str = "count2q") -> SynthResult | None:
    """Synthesize on ``cmap`` with whichever registered model fits it; ``None`` if none does.

    Networks that are already solved after trivial extraction need no model.
    The returned gates are in ``cmap`` labels.
    """
    s0 = SynthEnv(cmap).reset(pn)
    if s0.done:
        return SynthResult(pn.n, list(s0.emitted), True, metrics(s0.emitted), runs, runs, 0)
    sel = registry.select(cmap)
    if sel is None:
        return None
    entry, perm = sel
    res = synthesize(pn.permuted(perm), entry.cmap, entry.net, runs, rng=rng, metric=metric)
    inv = [0] * len(perm)
    for q, p in enumerate(perm):
        inv[p] = q
    res.gates = [g.remap(inv) for g in res.gates]
    res.model = entry.cmap.name
    return res


@dataclass(frozen=True)
class Stage:
    direction: str
    runs: int
    max_qubits: int


@dataclass(frozen=True)
class Workflow:
    name: str
    stages: tuple[Stage, ...]


def _pass(q: int, runs: int) -> tuple[Stage, ...]:
    return (Stage("forward", runs, q), Stage("backward", runs, q))


def preset(name: str) -> Workflow:
    if name == "rl_4q0_10":
        stages = (Stage("forward", 10, 4),)
    elif name == "rl_4q1_100":
        stages = _pass(4, 100)
    elif name == "rl_4q3_100":
        stages = _pass(4, 100) * 3
    elif name == "rl_all_100":
        stages = _pass(4, 100) * 3 + _pass(5, 100) + _pass(6, 100)
    else:
        raise ValueError(f"unknown workflow preset {name!r}")
    return Workflow(name, stages)


PRESETS = ("rl_4q0_10", "rl_4q1_100", "rl_4q3_100", "rl_all_100")


def check_routed(circuit: CircuitIR, device: CouplingMap):
    if circuit.n_qubits > device.n_qubits:
        raise ValueError(f"circuit has {circuit.n_qubits} qubits, device only {device.n_qubits}")
    edges = {frozenset(e) for e in device.edges}
    for i, g in enumerate(circuit.gates):
        if g.is_2q and frozenset(g.qubits) not in edges:
            raise MapViolation(i, g)


def optimize(circuit: CircuitIR, workflow: Workflow, registry: ModelRegistry, device: CouplingMap,
             metric: str = "count2q", seed: int = 0, verify_mode: str = "replay") -> tuple[CircuitIR, dict]:
    """Apply every workflow stage; a block is replaced only on strict metric improvement."""
    check_routed(circuit, device)
    t0 = time.perf_counter()
    before = metrics(circuit.gates)
    current = circuit
    rows = []
    for si, stage in enumerate(workflow.stages):
        blocks = collect(current, stage.max_qubits, stage.direction)
        out: list[Gate] = []
        for bi, blk in enumerate(blocks):
            orig = [current.gates[i] for i in blk.indices]
            new = _resynth_block(current, blk, orig, stage, registry, device, metric,
                                 seed=(seed, si, bi), verify_mode=verify_mode, rows=rows, stage_index=si)
            out.extend(new)
        current = CircuitIR(circuit.n_qubits, out)
    after = metrics(current.gates)
    if after["count2q"] > before["count2q"]:
        raise AssertionError("optimization increased the two-qubit gate count")
    check_routed(current, device)
    elapsed = time.perf_counter() - t0
    replaced = [r for r in rows if r["status"] == "replaced"]
    report = {
        "workflow": workflow.name,
        "metric": metric,
        "before": before,
        "after": after,
        "count2q_ratio": after["count2q"] / before["count2q"] if before["count2q"] else 1.0,
        "layers2q_ratio": after["layers2q"] / before["layers2q"] if before["layers2q"] else 1.0,
        "depth_increased": after["layers2q"] > before["layers2q"],
        "blocks": len(rows),
        "replacements": len(replaced),
        "skipped_no_model": sum(r["status"] == "no_model" for r in rows),
        "failed": sum(r["status"] == "failed" for r in rows),
        "verified": all(r.get("verified", True) for r in rows),
        "wall_time_s": elapsed,
        "rows": rows,
    }
    return current, report


def _resynth_block(circuit, blk, orig, stage, registry, device, metric, seed, verify_mode, rows, stage_index):
    if blk.barrier:
        return orig
    old = metrics(orig)
    if old["count2q"] == 0:
        return orig
    row = {"stage": stage_index, "qubits": blk.qubits, "gates": len(orig), "before": old}
    rows.append(row)
    local = blk.local_circuit(circuit.gates)
    pn = normalize(local)
    sub = induced_map(device, blk.qubits)
    if not sub.is_connected():
        row["status"] = "disconnected"
        return orig
    res = synthesize_with_registry(pn, sub, registry, stage.runs, rng=list(seed), metric=metric)
    if res is None:
        row["status"] = "no_model"
        return orig
    if not res.success:
        row["status"] = "failed"
        return orig
    new_local = res.gates
    row["model"] = res.model
    new = metrics(new_local)
    row["after"] = new
    if metric_key(new, metric) >= metric_key(old, metric):
        row["status"] = "kept"
        return orig
    ok = verify(pn, new_local, verify_mode)
    row["verified"] = ok
    if not ok:
        row["status"] = "verify_failed"
        log.error("replay verification failed for block on qubits %s", blk.qubits)
        return orig
    row["status"] = "replaced"
    return [g.remap(blk.qubits) for g in new_local]


def random_routed_circuit(device: CouplingMap, n_gates: int, rng: np.random.Generator,
                          p2q: float = 0.4, p_rot: float = 0.2, symbolic: bool = False) -> CircuitIR:
    """Random Clifford + rotation circuit whose CX gates all sit on device edges."""
    gates = []
    for i in range(n_gates):
        u = rng.random()
        if u < p2q:
            a, b = device.edges[int(rng.integers(len(device.edges)))]
            if rng.random() < 0.5:
                a, b = b, a
            gates.append(Gate("cx", (a, b)))
        elif u < p2q + p_rot:
            from .angles import LiteralAngle, SymbolAngle

            q = int(rng.integers(device.n_qubits))
            axis = ("rx", "ry", "rz")[int(rng.integers(3))]
            angle = SymbolAngle(f"p{i}") if symbolic else LiteralAngle(float(rng.uniform(-np.pi, np.pi)))
            gates.append(Gate(axis, (q,), angle))
        else:
            q = int(rng.integers(device.n_qubits))
            gates.append(Gate(("h", "s", "sdg")[int(rng.integers(3))], (q,)))
    return CircuitIR(device.n_qubits, gates)
