"""Rotation angles: numeric literals or opaque named parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class LiteralAngle:
    radians: float

    def __neg__(self) -> LiteralAngle:
        return LiteralAngle(-self.radians)

    def is_zero(self) -> bool:
        r = math.remainder(self.radians, 2 * math.pi)
        return abs(r) < ANGLE_TOL

    def value(self, bindings: Mapping[str, float] | None = None) -> float:
        return self.radians

    def __str__(self):
        return repr(float(self.radians))


@dataclass(frozen=True)
class SymbolAngle:
    name: str
    negated: bool = False

    def __neg__(self) -> SymbolAngle:
        return SymbolAngle(self.name, not self.negated)

    def is_zero(self) -> bool:
        return False

    def value(self, bindings: Mapping[str, float] | None = None) -> float:
        if bindings is None or self.name not in bindings:
            raise KeyError(f"unbound parameter {self.name!r}")
        v = float(bindings[self.name])
        return -v if self.negated else v

    def __str__(self):
        return ("-" if self.negated else "") + self.name


AngleRef = Union[LiteralAngle, SymbolAngle]


def angles_equal(a: AngleRef, b: AngleRef, tol: float = ANGLE_TOL) -> bool:
    if isinstance(a, LiteralAngle) and isinstance(b, LiteralAngle):
        return abs(a.radians - b.radians) <= tol
    return a == b


def angle_to_json(a: AngleRef):
    if isinstance(a, LiteralAngle):
        return a.radians
    return str(a)


def angle_from_json(v) -> AngleRef:
    if isinstance(v, (int, float)):
        return LiteralAngle(float(v))
    v = str(v)
    if v.startswith("-"):
        return SymbolAngle(v[1:], True)
    return SymbolAngle(v)


def symbols_in(angles) -> set[str]:
    return {a.name for a in angles if isinstance(a, SymbolAngle)}
