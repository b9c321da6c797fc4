"""Coupling maps and the gate action space they induce."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import networkx as nx

from .pauli import CX, Gate, H, S, Sdg


class CouplingMapError(ValueError):
    pass


@dataclass(frozen=True)
class CouplingMap:
    name: str
    n_qubits: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for a, b in self.edges:
            if not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits) or a == b:
                raise CouplingMapError(f"bad edge ({a}, {b}) for {self.n_qubits} qubits")
            key = (min(a, b), max(a, b))
            if key in seen:
                raise CouplingMapError(f"duplicate edge {key}")
            seen.add(key)

    def is_connected(self) -> bool:
        return self.n_qubits <= 1 or nx.is_connected(self.graph())

    def require_connected(self) -> CouplingMap:
        if not self.is_connected():
            raise CouplingMapError(f"coupling map {self.name!r} is not connected")
        return self

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_qubits))
        g.add_edges_from(self.edges)
        return g

    def allows(self, a: int, b: int) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def to_json(self) -> dict:
        return {"name": self.name, "n": self.n_qubits, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data: dict) -> CouplingMap:
        edges = tuple(tuple(map(int, e)) for e in data["edges"])
        return cls(str(data["name"]), int(data["n"]), edges).require_connected()

    @classmethod
    def load(cls, path: str | Path) -> CouplingMap:
        return cls.from_json(json.loads(Path(path).read_text()))


def line_map(k: int) -> CouplingMap:
    return CouplingMap(f"{k}qL", k, tuple((i, i + 1) for i in range(k - 1)))


def t_map(k: int) -> CouplingMap:
    """Path over ``k-1`` qubits plus one pendant qubit on a middle node."""
    if k < 4:
        raise CouplingMapError("T maps need at least 4 qubits")
    path = [(i, i + 1) for i in range(k - 2)]
    mid = (k - 2) // 2
    return CouplingMap(f"{k}qT", k, tuple(path + [(mid, k - 1)]))


def y_map_6() -> CouplingMap:
    """Center 0 with arms 0-1-2, 0-3-4 and 0-5."""
    return CouplingMap("6qY", 6, ((0, 1), (1, 2), (0, 3), (3, 4), (0, 5)))


def named_map(name: str) -> CouplingMap:
    if name == "6qY":
        return y_map_6()
    m = re.fullmatch(r"(\d+)q([LT])", name)
    if not m:
        raise CouplingMapError(f"unknown coupling map {name!r}")
    k = int(m.group(1))
    return line_map(k) if m.group(2) == "L" else t_map(k)


BUILTIN_MAPS = ("2qL", "3qL", "4qL", "4qT", "5qL", "5qT", "6qL", "6qT", "6qY")


def resolve_map(spec: str) -> CouplingMap:
    """A builtin name, or a path to a JSON ``{name, n, edges}`` file."""
    if Path(spec).suffix == ".json" or Path(spec).is_file():
        return CouplingMap.load(spec)
    return named_map(spec)


def legal_couplings(cmap: CouplingMap) -> list[Gate]:
    """Action list: ``H, S, Sdg`` per qubit, then both CX directions per edge."""
    actions = []
    for q in range(cmap.n_qubits):
        actions += [H(q), S(q), Sdg(q)]
    for a, b in cmap.edges:
        actions += [CX(a, b), CX(b, a)]
    return actions


def action_space_hash(actions: list[Gate]) -> str:
    text = ";".join(f"{g.name}:{','.join(map(str, g.qubits))}" for g in actions)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def induced_map(device: CouplingMap, qubits: list[int], name: str = "block") -> CouplingMap:
    """Subgraph of ``device`` induced on ``qubits``, relabelled ``0..k-1`` in the given order.

    The result may be disconnected; callers check :meth:`CouplingMap.is_connected`.
    """
    index = {q: i for i, q in enumerate(qubits)}
    edges = tuple((index[a], index[b]) for a, b in device.edges if a in index and b in index)
    return CouplingMap(name, len(qubits), edges)
