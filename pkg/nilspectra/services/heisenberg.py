"""Heisenberg group arithmetic in polarized coordinates.

Coordinates may be exact (int / Fraction), floats, or numpy arrays of floats
for batch evaluation. Exact inputs stay exact through every operation here.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Dict, Tuple, Union

import numpy as np

Scalar = Union[int, Fraction, float, np.ndarray]


def is_exact(value: Scalar) -> bool:
    """True for int and Fraction values (bool excluded)."""
    return isinstance(value, Rational) and not isinstance(value, bool)


def _floor(value: Scalar):
    if isinstance(value, np.ndarray):
        return np.floor(value).astype(np.int64)
    return math.floor(value)


def _wrap(value: Scalar, shift, period):
    """Fold a float that rounded onto the open end of [0, period) back to 0."""
    if isinstance(value, np.ndarray):
        over = value >= period
        return np.where(over, 0.0, value), np.where(over, shift - 1, shift)
    if not is_exact(value) and value >= period:
        return 0.0, shift - 1
    return value, shift


@dataclass(frozen=True)
class GroupElement:
    """A point (x, y, z) of the polarized Heisenberg group."""

    x: Scalar
    y: Scalar
    z: Scalar

    @classmethod
    def exact(cls, x, y, z) -> "GroupElement":
        """Build a rational-mode element from ints, Fractions, strings or floats."""
        return cls(Fraction(x), Fraction(y), Fraction(z))

    @property
    def is_exact(self) -> bool:
        return is_exact(self.x) and is_exact(self.y) and is_exact(self.z)

    def to_float(self) -> "GroupElement":
        if isinstance(self.x, np.ndarray):
            return self
        return GroupElement(float(self.x), float(self.y), float(self.z))

    def as_tuple(self) -> Tuple[Scalar, Scalar, Scalar]:
        return (self.x, self.y, self.z)

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return mul(self, other)

    def to_json(self) -> Dict[str, str]:
        """Debug serialization; rational mode only."""
        if not self.is_exact:
            raise ValueError("JSON serialization is defined for rational elements only")
        out = {}
        for key in ("x", "y", "z"):
            value = Fraction(getattr(self, key))
            out[key] = f"{value.numerator}/{value.denominator}"
        return out

    @classmethod
    def from_json(cls, data: Dict[str, str]) -> "GroupElement":
        return cls(Fraction(data["x"]), Fraction(data["y"]), Fraction(data["z"]))


IDENTITY = GroupElement(0, 0, 0)


@dataclass(frozen=True)
class LatticeElement:
    """Element (p, q, r/K) of the lattice, stored with integer r."""

    p: int
    q: int
    r: int

    def to_group(self, K: int) -> GroupElement:
        if isinstance(self.p, np.ndarray):
            return GroupElement(
                self.p.astype(float), self.q.astype(float), self.r / K
            )
        return GroupElement(Fraction(self.p), Fraction(self.q), Fraction(self.r, K))

    def mul(self, other: "LatticeElement", K: int) -> "LatticeElement":
        """Group product, computed in the integer coordinates."""
        return LatticeElement(
            self.p + other.p,
            self.q + other.q,
            self.r + other.r + K * self.p * other.q,
        )

    def inverse(self, K: int) -> "LatticeElement":
        return LatticeElement(-self.p, -self.q, -self.r + K * self.p * self.q)

    @property
    def is_identity(self) -> bool:
        return self.p == 0 and self.q == 0 and self.r == 0


@dataclass(frozen=True)
class LieVector:
    """Coefficients of a left-invariant field in the basis X, Y, Z."""

    vx: Scalar
    vy: Scalar
    vz: Scalar

    def __add__(self, other: "LieVector") -> "LieVector":
        return LieVector(self.vx + other.vx, self.vy + other.vy, self.vz + other.vz)

    def __sub__(self, other: "LieVector") -> "LieVector":
        return LieVector(self.vx - other.vx, self.vy - other.vy, self.vz - other.vz)

    def __neg__(self) -> "LieVector":
        return LieVector(-self.vx, -self.vy, -self.vz)

    def scale(self, t: Scalar) -> "LieVector":
        return LieVector(t * self.vx, t * self.vy, t * self.vz)

    __rmul__ = scale

    def bracket(self, other: "LieVector") -> "LieVector":
        """[self, other]; only the Z component survives."""
        return LieVector(0, 0, self.vx * other.vy - self.vy * other.vx)

    def at(self, m: GroupElement) -> Tuple[Scalar, Scalar, Scalar]:
        """Coordinate expression of the field at m (Y carries x along z)."""
        return (self.vx, self.vy, self.vz + m.x * self.vy)

    def to_float(self) -> "LieVector":
        return LieVector(float(self.vx), float(self.vy), float(self.vz))


X = LieVector(1, 0, 0)
Y = LieVector(0, 1, 0)
Z = LieVector(0, 0, 1)


@dataclass(frozen=True)
class ReducedPoint:
    """Representative in [0,1) x [0,1) x [0,1/K) and the lattice element used."""

    point: GroupElement
    lattice: LatticeElement
    K: int


def mul(g: GroupElement, h: GroupElement) -> GroupElement:
    return GroupElement(g.x + h.x, g.y + h.y, g.z + h.z + g.x * h.y)


def inverse(g: GroupElement) -> GroupElement:
    return GroupElement(-g.x, -g.y, -g.z + g.x * g.y)


def exp(v: LieVector) -> GroupElement:
    half = Fraction(1, 2) if is_exact(v.vx) and is_exact(v.vy) else 0.5
    return GroupElement(v.vx, v.vy, v.vz + half * v.vx * v.vy)


def flow(m: GroupElement, v: LieVector, t: Scalar) -> GroupElement:
    """Time-t flow of the left-invariant field v starting at m."""
    return mul(m, exp(v.scale(t)))


def commutator(g: GroupElement, h: GroupElement) -> GroupElement:
    return mul(mul(g, h), mul(inverse(g), inverse(h)))


def reduce(m: GroupElement, K: int) -> ReducedPoint:
    """Move m into the fundamental domain by a lattice element acting on the left.

    p is chosen first, then q, then r, so the representative is deterministic.
    """
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    p = -_floor(m.x)
    x, p = _wrap(m.x + p, p, 1)
    # (p, 0, 0) * m shifts z by p*y
    z = m.z + p * m.y
    q = -_floor(m.y)
    y, q = _wrap(m.y + q, q, 1)
    r = -_floor(K * z)
    if is_exact(z):
        z = z + Fraction(r, K)
    else:
        z = z + r / K
    z, r = _wrap(z, r, 1 / K)
    return ReducedPoint(GroupElement(x, y, z), LatticeElement(p, q, r), K)


def lattice_act(gamma: LatticeElement, m: GroupElement, K: int) -> GroupElement:
    """gamma * m."""
    return mul(gamma.to_group(K), m)


def project_to_torus(m: GroupElement) -> Tuple[Scalar, Scalar]:
    return (m.x % 1, m.y % 1)


def distance(g: GroupElement, h: GroupElement) -> float:
    """Max-coordinate distance between two lifts (no lattice reduction)."""
    return float(max(
        np.max(np.abs(np.asarray(g.x - h.x, dtype=float))),
        np.max(np.abs(np.asarray(g.y - h.y, dtype=float))),
        np.max(np.abs(np.asarray(g.z - h.z, dtype=float))),
    ))
