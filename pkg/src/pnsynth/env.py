"""Step-wise synthesis environment over a coupling-map action space.

A state holds the ``2n`` tableau columns and ``m`` rotation columns in one
bit-sliced :class:`PauliColumns`.  Each agent gate conjugates all columns;
afterwards every front-layer rotation of weight one is emitted as a
single-qubit rotation, cascading in ascending index order.

The episode ends when the tableau equals the identity up to signs and no
rotation is left.  The leftover sign pattern is a Pauli operator, emitted
as ``x``/``y``/``z`` gates that are not charged as agent actions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coupling import CouplingMap, action_space_hash, legal_couplings
from .network import PauliNetwork
from .pauli import Gate, PauliColumns

_AXIS_GATE = {(0, 1): "rx", (1, 1): "ry", (1, 0): "rz"}


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class RewardConfig:
    success_bonus: float = 10.0
    cost_1q: float = -0.05
    cost_2q: float = -0.2
    fail_penalty: float = -5.0

    def __post_init__(self):
        if self.cost_1q > 0 or self.cost_2q > 0 or self.fail_penalty > 0:
            raise ValueError("gate costs and fail penalty must be <= 0")
        if abs(self.cost_2q) <= abs(self.cost_1q):
            raise ValueError("two-qubit gates must cost more than one-qubit gates")


def default_budget(n: int, m: int) -> int:
    return 20 * n + 6 * m


@dataclass
class SynthState:
    n: int
    m: int
    cols: PauliColumns
    angles: list
    blockers: list[int]
    live: int
    emitted: list[Gate] = field(default_factory=list)
    step_count: int = 0
    budget: int = 1
    done: bool = False
    success: bool = False

    def copy(self) -> SynthState:
        return SynthState(
            self.n, self.m, self.cols.copy(), self.angles, self.blockers, self.live,
            list(self.emitted), self.step_count, self.budget, self.done, self.success,
        )

    def live_rotations(self) -> list[int]:
        out, mask = [], self.live
        while mask:
            low = mask & -mask
            out.append(low.bit_length() - 1)
            mask ^= low
        return out

    def tableau_is_frame(self) -> bool:
        n, c = self.n, self.cols
        tab = (1 << (2 * n)) - 1
        for q in range(n):
            if c.zs[q] & tab != 1 << q or c.xs[q] & tab != 1 << (n + q):
                return False
        return True

    def is_terminal(self) -> bool:
        return self.live == 0 and self.tableau_is_frame()

    def to_network(self) -> PauliNetwork:
        """Snapshot of the remaining (unsynthesized) network."""
        from .network import Rotation
        from .pauli import CliffordTableau

        n = self.n
        rows = tuple(self.cols.column(k) for k in range(2 * n))
        rots = []
        for i in self.live_rotations():
            p = self.cols.column(2 * n + i)
            a = self.angles[i]
            rots.append(Rotation(p.unsigned(), -a if p.sign < 0 else a))
        return PauliNetwork(n, CliffordTableau(n, rows), rots)


class SynthEnv:
    def __init__(self, cmap: CouplingMap, reward: RewardConfig | None = None, horizon: int = 8):
        self.cmap = cmap
        self.n = cmap.n_qubits
        self.reward = reward or RewardConfig()
        self.horizon = horizon
        self.actions = legal_couplings(cmap)
        self.action_hash = action_space_hash(self.actions)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def reset(self, pn: PauliNetwork, budget: int | None = None) -> SynthState:
        if pn.n != self.n:
            raise EnvError(f"network has {pn.n} qubits, coupling map has {self.n}")
        n, m = pn.n, pn.m
        if budget is None:
            budget = default_budget(n, m)
        if budget <= 0:
            raise EnvError("budget must be positive")
        paulis = list(pn.clifford.rows) + [r.pauli for r in pn.rotations]
        cols = PauliColumns.from_paulis(n, paulis)
        blockers = []
        for j, r in enumerate(pn.rotations):
            acc = 0
            for q in range(n):
                if (r.pauli.z >> q) & 1:
                    acc ^= cols.xs[q]
                if (r.pauli.x >> q) & 1:
                    acc ^= cols.zs[q]
            blockers.append((acc >> (2 * n)) & ((1 << j) - 1))
        s = SynthState(n, m, cols, [r.angle for r in pn.rotations], blockers, (1 << m) - 1, budget=budget)
        self._extract(s)
        self._check_done(s)
        return s

    def extract_trivial(self, s: SynthState) -> SynthState:
        s = s.copy()
        self._extract(s)
        return s

    def _extract(self, s: SynthState):
        n, cols = s.n, s.cols
        cand = (cols.weight_one_mask() >> (2 * n)) & s.live
        while cand:
            low = cand & -cand
            cand ^= low
            i = low.bit_length() - 1
            if s.blockers[i] & s.live:
                continue
            k = 2 * n + i
            for q in range(n):
                zb, xb = (cols.zs[q] >> k) & 1, (cols.xs[q] >> k) & 1
                if zb or xb:
                    break
            angle = s.angles[i]
            if (cols.signs >> k) & 1:
                angle = -angle
            s.emitted.append(Gate(_AXIS_GATE[(zb, xb)], (q,), angle))
            cols.clear(k)
            s.live &= ~low

    def _check_done(self, s: SynthState) -> bool:
        if s.is_terminal():
            s.done = s.success = True
            s.emitted.extend(self._frame_gates(s))
            return True
        return False

    def _frame_gates(self, s: SynthState) -> list[Gate]:
        n, signs = s.n, s.cols.signs
        out = []
        for q in range(n):
            has_x = (signs >> q) & 1
            has_z = (signs >> (n + q)) & 1
            if has_x or has_z:
                out.append(Gate("y" if has_x and has_z else ("x" if has_x else "z"), (q,)))
        return out

    def step(self, s: SynthState, action: int) -> tuple[SynthState, float, bool]:
        s = s.copy()
        r, done = self.step_inplace(s, action)
        return s, r, done

    def step_inplace(self, s: SynthState, action: int) -> tuple[float, bool]:
        if s.done:
            raise EnvError("cannot step a finished episode")
        if not 0 <= action < len(self.actions):
            raise EnvError(f"action {action} out of range [0, {len(self.actions)})")
        g = self.actions[action]
        s.cols.apply(g)
        s.emitted.append(g)
        s.step_count += 1
        reward = self.reward.cost_2q if g.name == "cx" else self.reward.cost_1q
        self._extract(s)
        if self._check_done(s):
            reward += self.reward.success_bonus
        elif s.step_count >= s.budget:
            s.done = True
            reward += self.reward.fail_penalty
        return reward, s.done

    def observation(self, s: SynthState, out: np.ndarray | None = None) -> np.ndarray:
        """Policy input ``2n x (2n + H)``: tableau columns then the first ``H`` live rotations."""
        n, h = s.n, self.horizon
        if out is None:
            out = np.zeros((2 * n, 2 * n + h), dtype=np.float32)
        else:
            out[:] = 0
        ncols = 2 * n + s.m
        nbytes = (ncols + 7) // 8
        cols = s.cols
        buf = b"".join(v.to_bytes(nbytes, "little") for v in cols.zs + cols.xs)
        bits = np.unpackbits(np.frombuffer(buf, np.uint8).reshape(2 * n, nbytes), axis=1, bitorder="little")
        idx = list(range(2 * n))
        mask = s.live
        while mask and len(idx) < 2 * n + h:
            low = mask & -mask
            idx.append(2 * n + low.bit_length() - 1)
            mask ^= low
        out[:, : len(idx)] = bits[:, idx]
        return out
