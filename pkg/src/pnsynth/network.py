"""Pauli Network canonical form: a list of Pauli rotations followed by a Clifford.

``PauliNetwork.clifford`` stores the tableau of ``C^dag`` (row ``k`` is
``C^dag G_k C`` for generator ``G_k``).  With that frame, emitting a gate
``g`` during synthesis is plain row conjugation, and a network is solved
when the tableau is the identity.  Rotations are listed in time order:
rotation 0 acts first.  Signs are folded into angles, so every stored
rotation Pauli has sign +1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .angles import AngleRef, angle_from_json, angle_to_json, angles_equal
from .circuit import CircuitIR
from .pauli import (
    CliffordTableau,
    Gate,
    PauliVec,
    anticommutes,
    is_identity_tableau,
    parse_pauli,
)

_AXIS = {"rx": "X", "ry": "Y", "rz": "Z"}


@dataclass(frozen=True)
class Rotation:
    pauli: PauliVec
    angle: AngleRef


@dataclass
class PauliNetwork:
    n: int
    clifford: CliffordTableau
    rotations: list[Rotation] = field(default_factory=list)

    @classmethod
    def identity(cls, n: int) -> PauliNetwork:
        return cls(n, CliffordTableau.identity(n), [])

    @property
    def m(self) -> int:
        return len(self.rotations)

    @property
    def dag(self) -> set[tuple[int, int]]:
        return build_dag([r.pauli for r in self.rotations])

    def front_layer(self) -> list[int]:
        return front_layer([r.pauli for r in self.rotations])

    def is_identity(self) -> bool:
        return self.m == 0 and is_identity_tableau(self.clifford)

    def permuted(self, perm: Sequence[int]) -> PauliNetwork:
        """Relabel qubit ``q`` as ``perm[q]``."""
        n = self.n
        rows = [None] * (2 * n)
        for q in range(n):
            rows[perm[q]] = self.clifford.rows[q].permuted(perm)
            rows[n + perm[q]] = self.clifford.rows[n + q].permuted(perm)
        rots = [Rotation(r.pauli.permuted(perm), r.angle) for r in self.rotations]
        return PauliNetwork(n, CliffordTableau(n, tuple(rows)), rots)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "clifford": self.clifford.labels,
            "rotations": [[str(r.pauli), angle_to_json(r.angle)] for r in self.rotations],
        }

    @classmethod
    def from_json(cls, data: dict) -> PauliNetwork:
        n = int(data["n"])
        cliff = CliffordTableau.from_labels(data["clifford"])
        if cliff.n != n or not cliff.is_symplectic():
            raise ValueError("clifford rows do not form a valid tableau")
        rots = []
        for label, angle in data.get("rotations", []):
            p = parse_pauli(label)
            a = angle_from_json(angle)
            if p.sign < 0:
                p, a = p.unsigned(), -a
            rots.append(Rotation(p, a))
        return cls(n, cliff, rots)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _fold(p: PauliVec, angle: AngleRef) -> Rotation:
    if p.sign < 0:
        return Rotation(p.unsigned(), -angle)
    return Rotation(p, angle)


def normalize(circuit: CircuitIR) -> PauliNetwork:
    """Rewrite a Clifford + single-qubit-rotation circuit as rotations then ``C``.

    Costs O(n) Pauli work per gate.  Zero literal rotations are dropped and
    barriers are ignored.
    """
    n = circuit.n_qubits
    inv = CliffordTableau.identity(n)  # tableau of C^dag for the prefix so far
    rots: list[Rotation] = []
    for g in circuit.gates:
        if g.is_rotation:
            if g.angle.is_zero():
                continue
            local = PauliVec.single(n, g.qubits[0], _AXIS[g.name])
            rots.append(_fold(inv.map_pauli(local), g.angle))
        elif g.is_clifford:
            inv = inv.precompose(g.inverse())
    return PauliNetwork(n, inv, rots)


def build_dag(paulis: Sequence[PauliVec]) -> set[tuple[int, int]]:
    """Edges ``(j, i)`` for ``i < j`` whenever the two Paulis anticommute."""
    return {
        (j, i)
        for j in range(len(paulis))
        for i in range(j)
        if anticommutes(paulis[i], paulis[j])
    }


def front_layer(paulis: Sequence[PauliVec]) -> list[int]:
    """Rotations with no earlier anticommuting rotation."""
    return [j for j in range(len(paulis)) if not any(anticommutes(paulis[i], paulis[j]) for i in range(j))]


def pauli_bits(p: PauliVec) -> np.ndarray:
    """Column vector ``z_0..z_{n-1} | x_0..x_{n-1}``."""
    n = p.n
    out = np.zeros(2 * n, dtype=bool)
    for q in range(n):
        out[q] = (p.z >> q) & 1
        out[n + q] = (p.x >> q) & 1
    return out


def network_to_bitmatrix(pn: PauliNetwork, horizon: int, pad: bool = False) -> np.ndarray:
    """Boolean matrix ``2n x (2n + min(m, horizon))``; ``pad`` zero-fills to ``2n + horizon``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    cols = [pauli_bits(r) for r in pn.clifford.rows]
    cols += [pauli_bits(r.pauli) for r in pn.rotations[:horizon]]
    mat = np.stack(cols, axis=1)
    if pad and mat.shape[1] < 2 * pn.n + horizon:
        extra = np.zeros((2 * pn.n, 2 * pn.n + horizon - mat.shape[1]), dtype=bool)
        mat = np.concatenate([mat, extra], axis=1)
    return mat


def networks_equivalent(a: PauliNetwork, b: PauliNetwork, tol: float = 1e-9) -> bool:
    """Sound algebraic equality check used for replay verification.

    Tableaux must match exactly (signs included) and ``b``'s rotations must be
    a commutation-respecting reordering of ``a``'s: each of ``b``'s rotations,
    in order, must equal some not-yet-matched rotation of ``a`` that has no
    earlier unmatched anticommuting rotation.
    """
    if a.n != b.n or a.clifford != b.clifford or a.m != b.m:
        return False
    remaining = list(range(a.m))
    for rb in b.rotations:
        hit = None
        for pos, i in enumerate(remaining):
            ra = a.rotations[i]
            if ra.pauli == rb.pauli and angles_equal(ra.angle, rb.angle, tol):
                hit = pos
                break
            if anticommutes(ra.pauli, rb.pauli):
                break
        if hit is None:
            return False
        remaining.pop(hit)
    return True


def network_from_gates(n: int, gates: Sequence[Gate]) -> PauliNetwork:
    return normalize(CircuitIR(n, list(gates)))
