import itertools
import json
import math

import networkx as nx
import numpy as np
import pytest

from pnsynth.angles import LiteralAngle, SymbolAngle, angle_from_json, angle_to_json
from pnsynth.circuit import CircuitError, CircuitIR, QasmError, parse_qasm, to_qasm
from pnsynth.dense import circuit_unitary, equal_up_to_phase, network_unitary, rotation_matrix, pauli_matrix
from pnsynth.network import (PauliNetwork, Rotation, build_dag, front_layer, network_to_bitmatrix,
                             networks_equivalent, normalize)
from pnsynth.pauli import CX, Gate, H, PauliVec, CliffordTableau, anticommutes, encode_pauli, is_identity_tableau

from .helpers import random_circuit


def test_parse_examples():
    c = parse_qasm("qreg q[1]; h q[0];")
    assert c.n_qubits == 1 and c.gates == [H(0)]
    c = parse_qasm("qreg q[2]; cx q[0],q[1]; rz(0.5) q[1];")
    assert c.gates == [CX(0, 1), Gate("rz", (1,), LiteralAngle(0.5))]
    c = parse_qasm("qreg q[1]; rz(theta) q[0];")
    assert c.gates[0].angle == SymbolAngle("theta")
    assert parse_qasm("qreg q[1]; rx(-phi) q[0];").gates[0].angle == SymbolAngle("phi", True)
    assert parse_qasm("qreg q[1]; ry(pi/2) q[0];").gates[0].angle == LiteralAngle(math.pi / 2)


def test_parse_header_comments_and_t():
    text = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n// c\nqreg q[2];\nt q[0]; tdg q[1];\nbarrier q;\n'
    c = parse_qasm(text)
    assert [g.name for g in c.gates] == ["rz", "rz", "barrier"]
    assert c.gates[1].angle == LiteralAngle(-math.pi / 4)


@pytest.mark.parametrize("text,line,match", [
    ("qreg q[1];\nu3(0,0,0) q[0];", 2, "unsupported gate"),
    ("qreg q[1];\nqreg r[1];", 2, "one qreg"),
    ("qreg q[1];\n\ncreg c[1];", 3, "creg"),
    ("qreg q[2];\ncx q[0] q[1];", 2, "expects 2"),
    ("qreg q[1];\nh q[3];", 2, "out of range"),
    ("qreg q[1];\nrz(1+) q[0];", 2, "malformed angle"),
    ('include "other.inc";', 1, "include"),
])
def test_parse_errors_carry_line(text, line, match):
    with pytest.raises(QasmError, match=match) as exc:
        parse_qasm(text)
    assert exc.value.line == line


def test_qasm_roundtrip():
    rng = np.random.default_rng(3)
    c = random_circuit(3, 25, rng, symbolic=True)
    assert parse_qasm(to_qasm(c)).gates == c.gates
    c = random_circuit(3, 25, rng)
    back = parse_qasm(to_qasm(c))
    assert all(abs(a.angle.radians - b.angle.radians) < 1e-15 for a, b in zip(c.gates, back.gates) if a.angle)


def test_circuit_validation():
    with pytest.raises(CircuitError):
        CircuitIR(1, [H(1)])
    with pytest.raises(CircuitError):
        CircuitIR(2, [Gate("rz", (0, 1), LiteralAngle(1.0))])


def test_angle_json_roundtrip():
    for a in (LiteralAngle(0.25), SymbolAngle("t"), SymbolAngle("t", True)):
        assert angle_from_json(angle_to_json(a)) == a
    assert -(-SymbolAngle("t")) == SymbolAngle("t")


def test_normalize_examples():
    pn = normalize(parse_qasm("qreg q[2]; h q[0]; cx q[0],q[1];"))
    assert pn.m == 0
    assert equal_up_to_phase(network_unitary(pn), circuit_unitary(2, [H(0), CX(0, 1)]))
    pn = normalize(parse_qasm("qreg q[1]; rz(a) q[0];"))
    assert is_identity_tableau(pn.clifford)
    assert [(str(r.pauli), str(r.angle)) for r in pn.rotations] == [("+Z", "a")]
    pn = normalize(parse_qasm("qreg q[1]; h q[0]; rz(a) q[0]; h q[0];"))
    assert is_identity_tableau(pn.clifford)
    assert [(str(r.pauli), str(r.angle)) for r in pn.rotations] == [("+X", "a")]
    # H Rz(a) H == Rx(a)
    h = circuit_unitary(1, [H(0)])
    assert np.allclose(h @ rotation_matrix(pauli_matrix(encode_pauli("Z")), 0.7) @ h,
                       rotation_matrix(pauli_matrix(encode_pauli("X")), 0.7))


def test_normalize_folds_signs_and_drops_zero():
    pn = normalize(parse_qasm("qreg q[1]; x q[0]; rz(a) q[0]; rz(0) q[0]; rz(2*pi) q[0];"))
    assert [(str(r.pauli), str(r.angle)) for r in pn.rotations] == [("+Z", "-a")]


def test_normalize_matches_dense_random():
    rng = np.random.default_rng(11)
    for _ in range(60):
        n = int(rng.integers(1, 4))
        c = random_circuit(n, int(rng.integers(0, 31)), rng)
        pn = normalize(c)
        assert pn.clifford.is_symplectic()
        assert equal_up_to_phase(circuit_unitary(n, c.gates), network_unitary(pn), 1e-12)


def test_build_dag_examples():
    z = encode_pauli("Z")
    assert build_dag([z, z, z]) == set() and front_layer([z, z, z]) == [0, 1, 2]
    assert build_dag([z, encode_pauli("X")]) == {(1, 0)}


def test_build_dag_matches_pairwise():
    rng = np.random.default_rng(5)
    ps = [PauliVec(4, int(rng.integers(16)), int(rng.integers(16))) for _ in range(10)]
    brute = {(j, i) for i, j in itertools.combinations(range(10), 2) if anticommutes(ps[i], ps[j])}
    dag = build_dag(ps)
    assert dag == brute
    assert all(j > i for j, i in dag)
    assert front_layer(ps) == [j for j in range(10) if not any(e[0] == j for e in dag)]


def test_any_topological_order_is_equivalent():
    rng = np.random.default_rng(8)
    for _ in range(5):
        n = 2
        rots = [Rotation(PauliVec(n, int(rng.integers(4)), int(rng.integers(4)) or 1), LiteralAngle(float(rng.uniform(-3, 3))))
                for _ in range(5)]
        pn = PauliNetwork(n, CliffordTableau.identity(n), rots)
        g = nx.DiGraph()
        g.add_nodes_from(range(5))
        g.add_edges_from((i, j) for j, i in pn.dag)
        ref = network_unitary(pn)
        for order in nx.all_topological_sorts(g):
            alt = PauliNetwork(n, pn.clifford, [rots[k] for k in order])
            assert equal_up_to_phase(ref, network_unitary(alt), 1e-9)
            assert networks_equivalent(pn, alt)


def test_networks_equivalent_rejects_illegal_swap():
    a = PauliNetwork(1, CliffordTableau.identity(1),
                     [Rotation(encode_pauli("Z"), SymbolAngle("a")), Rotation(encode_pauli("X"), SymbolAngle("b"))])
    b = PauliNetwork(1, a.clifford, a.rotations[::-1])
    assert networks_equivalent(a, a) and not networks_equivalent(a, b)


def test_bitmatrix_layout():
    ident = PauliNetwork.identity(3)
    assert (network_to_bitmatrix(ident, 8) == np.eye(6, dtype=bool)).all()
    # two qubits, three rotations: tableau columns then one column per Pauli
    pn = PauliNetwork(2, CliffordTableau.identity(2), [Rotation(encode_pauli(s), SymbolAngle(f"t{i}"))
                                                        for i, s in enumerate(("ZZ", "XI", "IY"))])
    mat = network_to_bitmatrix(pn, 8)
    assert mat.shape == (4, 7)
    assert mat[:, 4].tolist() == [1, 1, 0, 0]
    assert mat[:, 5].tolist() == [0, 0, 1, 0]
    assert mat[:, 6].tolist() == [0, 1, 0, 1]
    big = PauliNetwork(2, pn.clifford, pn.rotations * 7)
    assert network_to_bitmatrix(big, 8).shape == (4, 12)
    assert network_to_bitmatrix(ident, 8, pad=True).shape == (6, 14)
    with pytest.raises(ValueError):
        network_to_bitmatrix(pn, 0)


def test_network_json_roundtrip():
    rng = np.random.default_rng(2)
    pn = normalize(random_circuit(3, 30, rng, symbolic=True))
    back = PauliNetwork.from_json(json.loads(pn.dumps()))
    assert back.clifford == pn.clifford and back.rotations == pn.rotations
    with pytest.raises(ValueError):
        PauliNetwork.from_json({"n": 1, "clifford": ["Z", "Z"], "rotations": []})


def test_permuted_network_matches_relabelled_circuit():
    rng = np.random.default_rng(4)
    c = random_circuit(3, 20, rng)
    perm = [2, 0, 1]
    a = normalize(c).permuted(perm)
    b = normalize(CircuitIR(3, [g.remap(perm) for g in c.gates]))
    assert networks_equivalent(a, b, 1e-12)
