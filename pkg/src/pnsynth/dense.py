"""Dense state-vector oracle for small qubit counts.

Qubit 0 is the leftmost (most significant) tensor factor.  Everything here
is deliberately naive and independent of the bit-level code it checks.
"""

from __future__ import annotations

import itertools
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from .pauli import CliffordTableau, Gate, PauliVec, encode_pauli

I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)
_LETTER = {"I": I2, "X": PX, "Y": PY, "Z": PZ}
_ONE_Q = {
    "h": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "s": np.diag([1, 1j]),
    "sdg": np.diag([1, -1j]),
    "x": PX,
    "y": PY,
    "z": PZ,
}


def pauli_matrix(p: PauliVec) -> np.ndarray:
    return p.sign * reduce(np.kron, [_LETTER[c] for c in p.label])


def _embed(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    k = len(qubits)
    full = np.zeros((2**n, 2**n), dtype=complex)
    for col in range(2**n):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub = 0
        for q in qubits:
            sub = (sub << 1) | bits[q]
        for out_sub in range(2**k):
            amp = op[out_sub, sub]
            if amp == 0:
                continue
            nb = list(bits)
            for i, q in enumerate(qubits):
                nb[q] = (out_sub >> (k - 1 - i)) & 1
            row = 0
            for q in range(n):
                row = (row << 1) | nb[q]
            full[row, col] += amp
    return full


def rotation_matrix(pauli: np.ndarray, theta: float) -> np.ndarray:
    d = pauli.shape[0]
    return np.cos(theta / 2) * np.eye(d) - 1j * np.sin(theta / 2) * pauli


def gate_unitary(g: Gate, n: int, bindings: Mapping[str, float] | None = None) -> np.ndarray:
    if g.name == "cx":
        cx = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
        return _embed(cx, g.qubits, n)
    if g.name in _ONE_Q:
        return _embed(_ONE_Q[g.name], g.qubits, n)
    if g.is_rotation:
        axis = {"rx": PX, "ry": PY, "rz": PZ}[g.name]
        return _embed(rotation_matrix(axis, g.angle.value(bindings)), g.qubits, n)
    if g.name == "barrier":
        return np.eye(2**n, dtype=complex)
    raise ValueError(f"no dense form for {g}")


def circuit_unitary(n: int, gates: Sequence[Gate], bindings: Mapping[str, float] | None = None) -> np.ndarray:
    u = np.eye(2**n, dtype=complex)
    for g in gates:
        u = gate_unitary(g, n, bindings) @ u
    return u


def tableau_unitary(t: CliffordTableau) -> np.ndarray:
    """A unitary ``V`` with ``V G_k V^dag`` equal to row ``k`` (up to global phase)."""
    n = t.n
    d = 2**n
    proj = np.eye(d, dtype=complex)
    for q in range(n):
        proj = proj @ (np.eye(d) + pauli_matrix(t.rows[q])) / 2
    col = int(np.argmax(np.linalg.norm(proj, axis=0)))
    psi0 = proj[:, col] / np.linalg.norm(proj[:, col])
    xs = [pauli_matrix(t.rows[n + q]) for q in range(n)]
    u = np.zeros((d, d), dtype=complex)
    for basis in range(d):
        v = psi0
        for q in range(n):
            if (basis >> (n - 1 - q)) & 1:
                v = xs[q] @ v
        u[:, basis] = v
    return u


def network_unitary(pn, bindings: Mapping[str, float] | None = None) -> np.ndarray:
    """``C`` times the rotation product, rotation 0 applied first."""
    n = pn.n
    u = np.eye(2**n, dtype=complex)
    for r in pn.rotations:
        u = rotation_matrix(pauli_matrix(r.pauli), r.angle.value(bindings)) @ u
    return tableau_unitary(pn.clifford).conj().T @ u


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(a[idx]) < 1e-12:
        return False
    phase = a[idx] / b[idx]
    if abs(abs(phase) - 1) > tol:
        return False
    return bool(np.max(np.abs(a - phase * b)) <= tol)


def pauli_from_matrix(m: np.ndarray, n: int) -> PauliVec | None:
    """Identify ``m`` as ``+-P`` for a Pauli string ``P``; ``None`` otherwise."""
    for letters in itertools.product("IXYZ", repeat=n):
        p = encode_pauli("".join(letters))
        pm = pauli_matrix(p)
        ov = np.trace(pm.conj().T @ m) / 2**n
        if abs(abs(ov) - 1) < 1e-9:
            if abs(ov - 1) < 1e-9:
                return p
            if abs(ov + 1) < 1e-9:
                return -p
            return None
    return None
