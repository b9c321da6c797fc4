import numpy as np
import pytest

from pnsynth.angles import LiteralAngle
from pnsynth.circuit import CircuitIR
from pnsynth.coupling import CouplingMap, line_map, named_map
from pnsynth.network import networks_equivalent, normalize
from pnsynth.pauli import CX, Gate, H
from pnsynth.resynth import (PRESETS, MapViolation, ModelRegistry, Stage, Workflow, block_graph_acyclic,
                             check_routed, collect, optimize, preset, random_routed_circuit, select_model,
                             synthesize_with_registry)
from pnsynth.synthesizer import metrics

STUB = ModelRegistry.stub([named_map(n) for n in ("2qL", "3qL", "4qL", "4qT")], seed=0)


def rz(q, a=0.3):
    return Gate("rz", (q,), LiteralAngle(a))


def test_collect_single_block():
    c = CircuitIR(3, [CX(0, 1), rz(1), CX(1, 2), H(0)])
    blocks = collect(c, 3)
    assert len(blocks) == 1 and blocks[0].indices == [0, 1, 2, 3] and blocks[0].qubits == [0, 1, 2]


def test_collect_disjoint_groups():
    c = CircuitIR(4, [CX(0, 1), CX(2, 3), CX(0, 1), CX(2, 3)])
    blocks = collect(c, 2)
    assert sorted(b.qubits for b in blocks) == [[0, 1], [2, 3]]
    assert all(len(b.indices) == 2 for b in blocks)


def test_collect_respects_width_and_barrier():
    c = CircuitIR(3, [CX(0, 1), Gate("barrier", (0, 1, 2)), CX(1, 2), CX(0, 1)])
    blocks = collect(c, 2)
    assert [b.barrier for b in blocks] == [False, True, False, False]
    assert all(len(b.qubits) <= 2 for b in blocks if not b.barrier)
    with pytest.raises(ValueError):
        collect(c, 1)
    with pytest.raises(ValueError):
        collect(c, 2, "sideways")


@pytest.mark.parametrize("direction", ["forward", "backward"])
def test_collect_covers_and_is_convex(direction):
    rng = np.random.default_rng(4)
    device = line_map(8)
    for _ in range(10):
        c = random_routed_circuit(device, 120, rng)
        for k in (2, 3, 4):
            blocks = collect(c, k, direction)
            idx = sorted(i for b in blocks for i in b.indices)
            assert idx == list(range(len(c.gates)))
            assert all(len(b.qubits) <= k for b in blocks)
            assert block_graph_acyclic(c, blocks)
            # concatenating blocks in order is a valid schedule of the same circuit
            out = CircuitIR(8, [c.gates[i] for b in blocks for i in b.indices])
            assert networks_equivalent(normalize(c), normalize(out))


def test_forward_and_backward_differ():
    # H(0) joins CX(0,1) going forward; going backward it is seeded first and CX(0,1) is blocked
    c = CircuitIR(3, [CX(0, 1), CX(1, 2), H(0)])
    assert [b.indices for b in collect(c, 2, "forward")] == [[0, 2], [1]]
    assert [b.indices for b in collect(c, 2, "backward")] == [[0], [1], [2]]


def test_select_model_path_relabelling():
    reg = ModelRegistry.stub([named_map("4qL")])
    sub = CouplingMap("p", 4, ((2, 0), (0, 3), (3, 1)))
    entry, perm = select_model(sub, reg)
    assert entry.cmap.name == "4qL"
    model_edges = {frozenset(e) for e in entry.cmap.edges}
    assert {frozenset((perm[a], perm[b])) for a, b in sub.edges} == model_edges


def test_select_model_star_needs_t_model():
    star = CouplingMap("s", 4, ((2, 0), (2, 1), (2, 3)))
    assert select_model(star, ModelRegistry.stub([named_map("4qL")])) is None
    entry, perm = select_model(star, STUB)
    assert entry.cmap.name == "4qT" and perm[2] == 1


def test_registry_synthesis_maps_labels_back():
    star = CouplingMap("s", 4, ((2, 0), (2, 1), (2, 3)))
    c = CircuitIR(4, [CX(2, 0), rz(0), CX(2, 0)])
    pn = normalize(c)
    res = synthesize_with_registry(pn, star, STUB, runs=20, rng=0)
    assert res is not None and res.model == "4qT"
    if res.success:
        assert all(star.allows(*g.qubits) for g in res.gates if g.is_2q)
        assert networks_equivalent(pn, normalize(CircuitIR(4, res.gates)))
    assert synthesize_with_registry(pn, star, ModelRegistry(), 1) is None


def test_optimize_cancels_cx_pair():
    c = CircuitIR(2, [CX(0, 1), CX(0, 1)])
    out, rep = optimize(c, preset("rl_4q0_10"), ModelRegistry(), line_map(2))
    assert out.gates == [] and rep["after"]["count2q"] == 0 and rep["replacements"] == 1


def test_optimize_keeps_optimal_input():
    c = CircuitIR(2, [CX(0, 1), rz(1)])
    out, rep = optimize(c, preset("rl_4q0_10"), STUB, line_map(2))
    assert out.gates == c.gates and rep["replacements"] == 0


def test_optimize_rejects_unrouted():
    c = CircuitIR(4, [CX(0, 1), H(2), CX(0, 2)])
    with pytest.raises(MapViolation) as exc:
        optimize(c, preset("rl_4q0_10"), STUB, line_map(4))
    assert exc.value.index == 2 and "cx q[0],q[2]" in str(exc.value)
    with pytest.raises(ValueError):
        check_routed(CircuitIR(5, []), line_map(4))


def test_optimize_on_8q_line_is_safe():
    device = line_map(8)
    rng = np.random.default_rng(9)
    wf = Workflow("small", (Stage("forward", 8, 4), Stage("backward", 8, 4)))
    for _ in range(3):
        c = random_routed_circuit(device, 80, rng)
        out, rep = optimize(c, wf, STUB, device, seed=1)
        assert rep["verified"]
        assert rep["after"]["count2q"] <= rep["before"]["count2q"]
        assert all(device.allows(*g.qubits) for g in out.gates if g.is_2q)
        assert networks_equivalent(normalize(c), normalize(out))
        assert metrics(out.gates) == rep["after"]


def test_optimize_layers_metric_and_determinism():
    device = line_map(6)
    c = random_routed_circuit(device, 60, np.random.default_rng(2))
    a, ra = optimize(c, preset("rl_4q0_10"), STUB, device, metric="layers2q", seed=3)
    b, _ = optimize(c, preset("rl_4q0_10"), STUB, device, metric="layers2q", seed=3)
    assert a.gates == b.gates
    assert ra["after"]["layers2q"] <= ra["before"]["layers2q"]


def test_presets():
    assert set(PRESETS) == {"rl_4q0_10", "rl_4q1_100", "rl_4q3_100", "rl_all_100"}
    assert [(s.direction, s.runs, s.max_qubits) for s in preset("rl_4q0_10").stages] == [("forward", 10, 4)]
    assert len(preset("rl_4q1_100").stages) == 2
    assert len(preset("rl_4q3_100").stages) == 6
    assert [s.max_qubits for s in preset("rl_all_100").stages][-4:] == [5, 5, 6, 6]
    with pytest.raises(ValueError, match="unknown"):
        preset("rl_9q")
