"""Circuit IR and the OpenQASM 2 subset reader/writer."""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field

from .angles import AngleRef, LiteralAngle, SymbolAngle
from .pauli import ROTATION_GATES, Gate


class QasmError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CircuitError(ValueError):
    pass


@dataclass
class CircuitIR:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise CircuitError(f"qubit {q} out of range in {g}")
            if g.is_rotation and len(g.qubits) != 1:
                raise CircuitError(f"rotations must be single-qubit: {g}")
            if not (g.is_clifford or g.is_rotation or g.name == "barrier"):
                raise CircuitError(f"unsupported gate {g.name}")

    def __len__(self):
        return len(self.gates)

    def inverse(self) -> CircuitIR:
        return CircuitIR(self.n_qubits, [g.inverse() for g in reversed(self.gates)])


_ONE_Q = {"h", "s", "sdg", "x", "y", "z", "t", "tdg"}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_QARG = re.compile(r"^([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$")
_IDENT = re.compile(r"^[A-Za-z_]\w*$")


def _eval_num(node, line):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_num(node.operand, line)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_num(node.left, line), _eval_num(node.right, line))
    raise QasmError("unsupported angle expression (only numbers, pi and + - * /, or a bare parameter)", line)


def parse_angle(text: str, line: int | None = None) -> AngleRef:
    text = text.strip()
    neg = text.startswith("-")
    bare = text[1:].strip() if neg else text
    if _IDENT.match(bare) and bare != "pi":
        return SymbolAngle(bare, neg)
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError:
        raise QasmError(f"malformed angle {text!r}", line) from None
    return LiteralAngle(_eval_num(tree.body, line))


def _statements(text: str):
    """Yield ``(line_number, statement)`` pairs, comments stripped."""
    buf, start = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("//", 1)[0]
        while line:
            if start is None and line.strip():
                start = lineno
            head, sep, line = line.partition(";")
            buf.append(head)
            if sep:
                stmt = " ".join(buf).strip()
                if stmt:
                    yield start, stmt
                buf, start = [], None
    if " ".join(buf).strip():
        raise QasmError("missing ';' at end of input", start)


def parse_qasm(text: str) -> CircuitIR:
    """Parse the supported OpenQASM 2 subset into a :class:`CircuitIR`."""
    reg = None
    n = 0
    gates: list[Gate] = []

    def qubit(arg, line):
        m = _QARG.match(arg.strip())
        if not m:
            if reg is not None and arg.strip() == reg:
                return None
            raise QasmError(f"malformed qubit argument {arg.strip()!r}", line)
        if m.group(1) != reg:
            raise QasmError(f"unknown register {m.group(1)!r}", line)
        q = int(m.group(2))
        if q >= n:
            raise QasmError(f"qubit index {q} out of range for {reg}[{n}]", line)
        return q

    for line, stmt in _statements(text):
        if stmt.startswith("OPENQASM"):
            continue
        if stmt.startswith("include"):
            if stmt.split(None, 1)[1].strip() != '"qelib1.inc"':
                raise QasmError("include files other than qelib1.inc are not supported", line)
            continue
        m = re.match(r"^qreg\s+([A-Za-z_]\w*)\s*\[\s*(\d+)\s*\]$", stmt)
        if m:
            if reg is not None:
                raise QasmError("only one qreg is supported", line)
            reg, n = m.group(1), int(m.group(2))
            continue
        head = stmt.split(None, 1)[0].split("(", 1)[0]
        if head in ("creg", "measure", "reset", "if", "gate", "opaque"):
            raise QasmError(f"unsupported statement {head!r}", line)
        if reg is None:
            raise QasmError("gate before qreg declaration", line)
        m = re.match(r"^([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*(.*)$", stmt)
        if not m:
            raise QasmError(f"malformed statement {stmt!r}", line)
        name, param, args = m.group(1), m.group(2), m.group(3)
        qargs = [a for a in args.split(",") if a.strip()]
        if name == "barrier":
            qs = []
            for a in qargs:
                q = qubit(a, line)
                qs.extend(range(n) if q is None else [q])
            gates.append(Gate("barrier", tuple(qs)))
            continue
        if name not in _ONE_Q and name not in ROTATION_GATES and name != "cx":
            raise QasmError(f"unsupported gate {name!r}", line)
        want = 2 if name == "cx" else 1
        if len(qargs) != want:
            raise QasmError(f"{name} expects {want} qubit argument(s), got {len(qargs)}", line)
        qs = tuple(qubit(a, line) for a in qargs)
        if None in qs:
            raise QasmError(f"register broadcast is not supported for {name}", line)
        if name == "cx" and qs[0] == qs[1]:
            raise QasmError("cx control equals target", line)
        if name in ROTATION_GATES:
            if param is None:
                raise QasmError(f"{name} requires an angle", line)
            gates.append(Gate(name, qs, parse_angle(param, line)))
        elif param is not None:
            raise QasmError(f"{name} takes no parameters", line)
        elif name in ("t", "tdg"):
            a = math.pi / 4
            gates.append(Gate("rz", qs, LiteralAngle(a if name == "t" else -a)))
        else:
            gates.append(Gate(name, qs))
    if reg is None:
        raise QasmError("no qreg declared")
    return CircuitIR(n, gates)


def to_qasm(circuit: CircuitIR) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.n_qubits}];"]
    for g in circuit.gates:
        lines.append(f"{g};")
    return "\n".join(lines) + "\n"


def count_gates(gates) -> dict[str, int]:
    out: dict[str, int] = {}
    for g in gates:
        out[g.name] = out.get(g.name, 0) + 1
    return out

