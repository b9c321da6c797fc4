import numpy as np

from pnsynth.angles import LiteralAngle, SymbolAngle
from pnsynth.circuit import CircuitIR
from pnsynth.pauli import Gate

ONE_Q = ("h", "s", "sdg", "x", "y", "z")


def random_circuit(n, n_gates, rng, symbolic=False, p_rot=0.35):
    """Clifford + rx/ry/rz circuit on all-to-all connectivity."""
    gates = []
    for i in range(n_gates):
        u = rng.random()
        if u < p_rot:
            angle = SymbolAngle(f"a{i}") if symbolic else LiteralAngle(float(rng.uniform(-np.pi, np.pi)))
            gates.append(Gate(("rx", "ry", "rz")[rng.integers(3)], (int(rng.integers(n)),), angle))
        elif n > 1 and u < p_rot + 0.3:
            a, b = rng.choice(n, 2, replace=False)
            gates.append(Gate("cx", (int(a), int(b))))
        else:
            gates.append(Gate(ONE_Q[rng.integers(len(ONE_Q))], (int(rng.integers(n)),)))
    return CircuitIR(n, gates)


def random_bindings(names, rng):
    return {s: float(rng.uniform(-np.pi, np.pi)) for s in sorted(names)}
