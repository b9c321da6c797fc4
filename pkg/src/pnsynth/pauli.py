"""Bit-level Pauli operators and Clifford tableaux.

A Pauli on ``n`` qubits is stored as two integers used as bit vectors
(bit ``q`` is qubit ``q``) plus a sign.  Letters follow the 2-bit code
``zx``: ``I=00, X=01, Y=11, Z=10``.  ``Y`` is the Hermitian Y, never ``XZ``.

Tableaux hold the images ``V Z_q V^dag`` (rows ``0..n-1``) followed by
``V X_q V^dag`` (rows ``n..2n-1``) of a Clifford ``V``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .angles import AngleRef

_LETTER_BITS = {"I": (0, 0), "X": (0, 1), "Y": (1, 1), "Z": (1, 0)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}

CLIFFORD_GATES = frozenset({"h", "s", "sdg", "x", "y", "z", "cx"})
ROTATION_GATES = frozenset({"rx", "ry", "rz"})
_INVERSE = {"h": "h", "s": "sdg", "sdg": "s", "x": "x", "y": "y", "z": "z", "cx": "cx"}


class PauliError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    """One circuit instruction.

    Clifford gates use ``h, s, sdg, x, y, z, cx``; single-qubit rotations use
    ``rx, ry, rz`` with an ``angle``.  ``barrier`` carries no semantics.
    """

    name: str
    qubits: tuple[int, ...]
    angle: AngleRef | None = None

    def __post_init__(self):
        if self.name == "cx" and (len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]):
            raise PauliError(f"cx needs two distinct qubits, got {self.qubits}")

    @property
    def is_clifford(self) -> bool:
        return self.name in CLIFFORD_GATES

    @property
    def is_rotation(self) -> bool:
        return self.name in ROTATION_GATES

    @property
    def is_2q(self) -> bool:
        return len(self.qubits) == 2 and self.name != "barrier"

    def inverse(self) -> Gate:
        if self.is_rotation:
            return Gate(self.name, self.qubits, -self.angle)
        return Gate(_INVERSE[self.name], self.qubits)

    def remap(self, mapping: Sequence[int] | dict) -> Gate:
        return Gate(self.name, tuple(mapping[q] for q in self.qubits), self.angle)

    def __str__(self):
        args = ",".join(f"q[{q}]" for q in self.qubits)
        if self.angle is not None:
            return f"{self.name}({self.angle}) {args}"
        return f"{self.name} {args}"


def H(q):
    return Gate("h", (q,))


def S(q):
    return Gate("s", (q,))


def Sdg(q):
    return Gate("sdg", (q,))


def CX(c, t):
    return Gate("cx", (c, t))


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliVec:
    n: int
    z: int
    x: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise PauliError(f"sign must be +1 or -1, got {self.sign}")

    @classmethod
    def identity(cls, n: int) -> PauliVec:
        return cls(n, 0, 0, 1)

    @classmethod
    def single(cls, n: int, q: int, letter: str) -> PauliVec:
        zb, xb = _LETTER_BITS[letter]
        return cls(n, zb << q, xb << q, 1)

    def letter(self, q: int) -> str:
        return _BITS_LETTER[((self.z >> q) & 1, (self.x >> q) & 1)]

    @property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    @property
    def support(self) -> list[int]:
        s = self.z | self.x
        return [q for q in range(self.n) if (s >> q) & 1]

    def is_identity(self) -> bool:
        return self.z == 0 and self.x == 0

    def unsigned(self) -> PauliVec:
        return PauliVec(self.n, self.z, self.x, 1)

    def __neg__(self) -> PauliVec:
        return PauliVec(self.n, self.z, self.x, -self.sign)

    def permuted(self, perm: Sequence[int]) -> PauliVec:
        """Move qubit ``q`` to ``perm[q]``."""
        z = x = 0
        for q in range(self.n):
            z |= ((self.z >> q) & 1) << perm[q]
            x |= ((self.x >> q) & 1) << perm[q]
        return PauliVec(self.n, z, x, self.sign)

    def __str__(self):
        return ("+" if self.sign == 1 else "-") + self.label


def encode_pauli(label: str, sign: int = 1) -> PauliVec:
    if not label:
        raise PauliError("empty Pauli label")
    z = x = 0
    for q, ch in enumerate(label):
        try:
            zb, xb = _LETTER_BITS[ch]
        except KeyError:
            raise PauliError(f"invalid Pauli letter {ch!r} at position {q}") from None
        z |= zb << q
        x |= xb << q
    return PauliVec(len(label), z, x, sign)


def parse_pauli(text: str) -> PauliVec:
    """Parse ``[+|-]LETTERS`` with qubit 0 leftmost."""
    text = text.strip()
    sign = 1
    if text[:1] in "+-" and text:
        sign = -1 if text[0] == "-" else 1
        text = text[1:]
    return encode_pauli(text, sign)


def _check_dims(a: PauliVec, b: PauliVec):
    if a.n != b.n:
        raise PauliError(f"dimension mismatch: {a.n} vs {b.n}")


def anticommutes(a: PauliVec, b: PauliVec) -> bool:
    _check_dims(a, b)
    return bool(_popcount((a.z & b.x) ^ (a.x & b.z)) & 1)


def weight(p: PauliVec) -> int:
    return _popcount(p.z | p.x)


def pauli_product(a: PauliVec, b: PauliVec) -> tuple[PauliVec, int]:
    """Return ``(P, e)`` with ``a @ b == i**e * P`` and ``P`` carrying sign +1."""
    _check_dims(a, b)
    ya, xa, za = a.x & a.z, a.x & ~a.z, a.z & ~a.x
    yb, xb, zb = b.x & b.z, b.x & ~b.z, b.z & ~b.x
    plus = _popcount((ya & zb) | (xa & yb) | (za & xb))
    minus = _popcount((ya & xb) | (xa & zb) | (za & yb))
    e = plus - minus + (2 if a.sign < 0 else 0) + (2 if b.sign < 0 else 0)
    return PauliVec(a.n, a.z ^ b.z, a.x ^ b.x, 1), e % 4


def _check_gate(g: Gate, n: int):
    for q in g.qubits:
        if not 0 <= q < n:
            raise PauliError(f"qubit {q} out of range for {n} qubits in {g}")


def conjugate(p: PauliVec, g: Gate) -> PauliVec:
    """Return ``g P g^dag`` including its sign."""
    _check_gate(g, p.n)
    z, x = p.z, p.x
    flip = 0
    name = g.name
    if name == "cx":
        c, t = g.qubits
        xc, zc = (x >> c) & 1, (z >> c) & 1
        xt, zt = (x >> t) & 1, (z >> t) & 1
        flip = xc & zt & (xt ^ zc ^ 1)
        x ^= xc << t
        z ^= zt << c
    else:
        (q,) = g.qubits
        xq, zq = (x >> q) & 1, (z >> q) & 1
        if name == "h":
            flip = xq & zq
            if xq != zq:
                x ^= 1 << q
                z ^= 1 << q
        elif name == "s":
            flip = xq & zq
            z ^= xq << q
        elif name == "sdg":
            flip = xq & (zq ^ 1)
            z ^= xq << q
        elif name == "x":
            flip = zq
        elif name == "y":
            flip = xq ^ zq
        elif name == "z":
            flip = xq
        else:
            raise PauliError(f"not a Clifford gate: {g}")
    return PauliVec(p.n, z, x, -p.sign if flip else p.sign)


@dataclass(frozen=True)
class CliffordTableau:
    n: int
    rows: tuple[PauliVec, ...]

    @classmethod
    def identity(cls, n: int) -> CliffordTableau:
        rows = [PauliVec(n, 1 << q, 0) for q in range(n)]
        rows += [PauliVec(n, 0, 1 << q) for q in range(n)]
        return cls(n, tuple(rows))

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> CliffordTableau:
        rows = tuple(parse_pauli(s) for s in labels)
        return cls(len(rows) // 2, rows)

    @property
    def labels(self) -> list[str]:
        return [str(r) for r in self.rows]

    def is_symplectic(self) -> bool:
        n = self.n
        for i in range(2 * n):
            for j in range(i + 1, 2 * n):
                if anticommutes(self.rows[i], self.rows[j]) != (j == i + n):
                    return False
        return True

    def map_pauli(self, p: PauliVec) -> PauliVec:
        """Image ``V P V^dag`` of ``p`` under the tableau's Clifford ``V``."""
        _check_dims(p, self.rows[0])
        acc = PauliVec.identity(self.n)
        e = 0
        for q in range(self.n):
            xq, zq = (p.x >> q) & 1, (p.z >> q) & 1
            if xq:
                acc, k = pauli_product(acc, self.rows[self.n + q])
                e += k
            if zq:
                acc, k = pauli_product(acc, self.rows[q])
                e += k
            if xq and zq:
                e += 1
        e %= 4
        if e & 1:
            raise PauliError("non-Hermitian image; tableau is not symplectic")
        sign = p.sign * (-1 if e == 2 else 1)
        return PauliVec(self.n, acc.z, acc.x, sign)

    def precompose(self, g: Gate) -> CliffordTableau:
        """Tableau of ``V g`` (``g`` acts first)."""
        _check_gate(g, self.n)
        rows = list(self.rows)
        for q in set(g.qubits):
            for k in (q, self.n + q):
                rows[k] = self.map_pauli(conjugate(_generator(self.n, k), g))
        return CliffordTableau(self.n, tuple(rows))


def _generator(n: int, k: int) -> PauliVec:
    return PauliVec(n, 1 << k, 0) if k < n else PauliVec(n, 0, 1 << (k - n))


def tableau_apply(t: CliffordTableau, g: Gate) -> CliffordTableau:
    """Tableau of ``g V``: every row conjugated by ``g``."""
    return CliffordTableau(t.n, tuple(conjugate(r, g) for r in t.rows))


def is_identity_tableau(t: CliffordTableau) -> bool:
    return t == CliffordTableau.identity(t.n)


def is_pauli_frame(t: CliffordTableau) -> bool:
    """True when the tableau equals the identity up to row signs."""
    ident = CliffordTableau.identity(t.n)
    return all(r.z == i.z and r.x == i.x for r, i in zip(t.rows, ident.rows))


def pauli_frame_gates(t: CliffordTableau) -> list[Gate]:
    """Pauli gates implementing ``V^dag`` for a sign-only tableau ``V``.

    Row ``Z_q`` negated means the Pauli anticommutes with ``Z_q`` (has an X
    part), row ``X_q`` negated means it has a Z part.
    """
    gates = []
    for q in range(t.n):
        has_x = t.rows[q].sign < 0
        has_z = t.rows[t.n + q].sign < 0
        if has_x and has_z:
            gates.append(Gate("y", (q,)))
        elif has_x:
            gates.append(Gate("x", (q,)))
        elif has_z:
            gates.append(Gate("z", (q,)))
    return gates


class PauliColumns:
    """Bit-sliced store of many Paulis on the same ``n`` qubits.

    ``zs[q]``/``xs[q]`` are integers whose bit ``k`` is column ``k``'s
    z/x bit on qubit ``q``; ``signs`` has bit ``k`` set for a ``-`` sign.
    Conjugating every column by one gate costs a handful of word operations.
    """

    __slots__ = ("n", "zs", "xs", "signs")

    def __init__(self, n: int, zs: list[int], xs: list[int], signs: int = 0):
        self.n = n
        self.zs = zs
        self.xs = xs
        self.signs = signs

    @classmethod
    def from_paulis(cls, n: int, paulis: Sequence[PauliVec]) -> PauliColumns:
        zs, xs, signs = [0] * n, [0] * n, 0
        for k, p in enumerate(paulis):
            for q in range(n):
                zs[q] |= ((p.z >> q) & 1) << k
                xs[q] |= ((p.x >> q) & 1) << k
            if p.sign < 0:
                signs |= 1 << k
        return cls(n, zs, xs, signs)

    def copy(self) -> PauliColumns:
        return PauliColumns(self.n, list(self.zs), list(self.xs), self.signs)

    def column(self, k: int) -> PauliVec:
        z = x = 0
        for q in range(self.n):
            z |= ((self.zs[q] >> k) & 1) << q
            x |= ((self.xs[q] >> k) & 1) << q
        return PauliVec(self.n, z, x, -1 if (self.signs >> k) & 1 else 1)

    def clear(self, k: int):
        m = ~(1 << k)
        for q in range(self.n):
            self.zs[q] &= m
            self.xs[q] &= m
        self.signs &= m

    def weight_one_mask(self) -> int:
        ones = twos = 0
        for q in range(self.n):
            a = self.zs[q] | self.xs[q]
            twos |= ones & a
            ones |= a
        return ones & ~twos

    def apply(self, g: Gate):
        """Conjugate every column by ``g`` in place."""
        zs, xs = self.zs, self.xs
        name = g.name
        if name == "cx":
            c, t = g.qubits
            self.signs ^= xs[c] & zs[t] & ~(xs[t] ^ zs[c])
            xs[t] ^= xs[c]
            zs[c] ^= zs[t]
            return
        (q,) = g.qubits
        if name == "h":
            self.signs ^= xs[q] & zs[q]
            xs[q], zs[q] = zs[q], xs[q]
        elif name == "s":
            self.signs ^= xs[q] & zs[q]
            zs[q] ^= xs[q]
        elif name == "sdg":
            self.signs ^= xs[q] & ~zs[q]
            zs[q] ^= xs[q]
        elif name == "x":
            self.signs ^= zs[q]
        elif name == "y":
            self.signs ^= xs[q] ^ zs[q]
        elif name == "z":
            self.signs ^= xs[q]
        else:
            raise PauliError(f"not a Clifford gate: {g}")
