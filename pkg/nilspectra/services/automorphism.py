"""Partially hyperbolic automorphisms of the Heisenberg nilmanifold.

Phi(x, y, z) = (ax + by, cx + dy, z + tau(x, y)) with
tau(x, y) = (ac/2) x^2 + bc xy + (bd/2) y^2 + (ac/2 + ell) x + (bd/2 + m) y.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Tuple

import numpy as np

from nilspectra.exceptions import DeterminantError, NotHyperbolicError, OrientationError
from nilspectra.models import AutomorphismSpec
from nilspectra.services.heisenberg import (
    GroupElement,
    LieVector,
    Scalar,
    distance,
    flow,
    is_exact,
    reduce,
)
from nilspectra.utils.logger import get_logger

logger = get_logger()

IntMatrix = Tuple[Tuple[int, int], Tuple[int, int]]

HALF = Fraction(1, 2)


def mat_mul(A: IntMatrix, B: IntMatrix) -> IntMatrix:
    return (
        (A[0][0] * B[0][0] + A[0][1] * B[1][0], A[0][0] * B[0][1] + A[0][1] * B[1][1]),
        (A[1][0] * B[0][0] + A[1][1] * B[1][0], A[1][0] * B[0][1] + A[1][1] * B[1][1]),
    )


def mat_transpose(A: IntMatrix) -> IntMatrix:
    return ((A[0][0], A[1][0]), (A[0][1], A[1][1]))


IDENTITY_MATRIX: IntMatrix = ((1, 0), (0, 1))


@dataclass(frozen=True)
class QuadPoly:
    """Exact polynomial xx*x^2 + xy*x*y + yy*y^2 + lx*x + ly*y."""

    xx: Fraction = Fraction(0)
    xy: Fraction = Fraction(0)
    yy: Fraction = Fraction(0)
    lx: Fraction = Fraction(0)
    ly: Fraction = Fraction(0)

    def coefficients(self) -> Tuple[Fraction, ...]:
        return (self.xx, self.xy, self.yy, self.lx, self.ly)

    def __call__(self, x: Scalar, y: Scalar) -> Scalar:
        if is_exact(x) and is_exact(y):
            xx, xy, yy, lx, ly = self.coefficients()
        else:
            xx, xy, yy, lx, ly = (float(c) for c in self.coefficients())
        return xx * x * x + xy * x * y + yy * y * y + lx * x + ly * y

    def __add__(self, other: "QuadPoly") -> "QuadPoly":
        return QuadPoly(*(s + o for s, o in zip(self.coefficients(), other.coefficients())))

    def __neg__(self) -> "QuadPoly":
        return QuadPoly(*(-s for s in self.coefficients()))

    def compose(self, M: IntMatrix) -> "QuadPoly":
        """The polynomial (x, y) -> self(M (x, y))."""
        (a, b), (c, d) = M
        return QuadPoly(
            xx=self.xx * a * a + self.xy * a * c + self.yy * c * c,
            xy=2 * self.xx * a * b + self.xy * (a * d + b * c) + 2 * self.yy * c * d,
            yy=self.xx * b * b + self.xy * b * d + self.yy * d * d,
            lx=self.lx * a + self.ly * c,
            ly=self.lx * b + self.ly * d,
        )

    def doubled(self) -> Tuple[int, ...]:
        """Integer coefficients of 2*self; defined because every coefficient lies in Z/2."""
        out = []
        for coeff in self.coefficients():
            twice = 2 * coeff
            if twice.denominator != 1:
                raise ValueError(f"coefficient {coeff} is not a half-integer")
            out.append(int(twice))
        return tuple(out)


@dataclass(frozen=True)
class Cocycle:
    """Phi^n(x, y, z) = (A^n (x, y), z + tau_n(x, y))."""

    n: int
    tau: QuadPoly
    matrix: IntMatrix

    def apply(self, m: GroupElement) -> GroupElement:
        (a, b), (c, d) = self.matrix
        if not (is_exact(m.x) and is_exact(m.y)):
            a, b, c, d = float(a), float(b), float(c), float(d)
        return GroupElement(a * m.x + b * m.y, c * m.x + d * m.y, m.z + self.tau(m.x, m.y))


@dataclass(frozen=True)
class Frame:
    """Adapted frame: W expands by lam, V contracts by 1/lam, [V, W] = Z."""

    lam: float
    alpha: float
    beta: float
    gamma: float
    gamma_prime: float
    sigma_x: float
    sigma_y: float

    @property
    def W(self) -> LieVector:
        return LieVector(self.alpha, self.beta, self.gamma)

    @property
    def V(self) -> LieVector:
        return LieVector(self.sigma_x, self.sigma_y, -self.gamma_prime)

    def eigen_residuals(self, A: IntMatrix) -> Tuple[float, float]:
        """Residuals of A u = lam u and A s = s / lam for the frame directions."""
        M = np.array(A, dtype=float)
        u = np.array([self.alpha, self.beta])
        s = np.array([self.sigma_x, self.sigma_y])
        return (
            float(np.max(np.abs(M @ u - self.lam * u))),
            float(np.max(np.abs(M @ s - s / self.lam))),
        )


@dataclass(frozen=True)
class PushforwardResidual:
    step: float
    flow_v: float
    flow_w: float
    tangent_v: float
    tangent_w: float


@dataclass(frozen=True)
class PartialHypAuto:
    """Validated automorphism data; build() is the only intended constructor."""

    a: int
    b: int
    c: int
    d: int
    ell: int
    m: int
    K: int
    lam: float

    @property
    def trace(self) -> int:
        return self.a + self.d

    @property
    def matrix(self) -> IntMatrix:
        return ((self.a, self.b), (self.c, self.d))

    @property
    def minimal_polynomial(self) -> Tuple[int, int, int]:
        """Coefficients of t^2 - trace*t + 1."""
        return (1, -self.trace, 1)

    @property
    def tau_x(self) -> Fraction:
        """Linear x coefficient of tau, ac/2 + ell."""
        return self.a * self.c * HALF + self.ell

    @property
    def tau_y(self) -> Fraction:
        """Linear y coefficient of tau, bd/2 + m."""
        return self.b * self.d * HALF + self.m

    @cached_property
    def tau(self) -> QuadPoly:
        a, b, c, d = self.a, self.b, self.c, self.d
        return QuadPoly(a * c * HALF, Fraction(b * c), b * d * HALF, self.tau_x, self.tau_y)

    @cached_property
    def frame(self) -> Frame:
        return compute_frame(self)

    def spec(self) -> AutomorphismSpec:
        return AutomorphismSpec(a=self.a, b=self.b, c=self.c, d=self.d, ell=self.ell, m=self.m)

    def apply(self, m: GroupElement) -> GroupElement:
        exact = is_exact(m.x) and is_exact(m.y)
        a, b, c, d = (self.a, self.b, self.c, self.d) if exact else (
            float(self.a), float(self.b), float(self.c), float(self.d)
        )
        return GroupElement(a * m.x + b * m.y, c * m.x + d * m.y, m.z + self.tau(m.x, m.y))

    def apply_lie(self, v: LieVector) -> LieVector:
        """Differential of Phi on the Lie algebra."""
        if is_exact(v.vx) and is_exact(v.vy):
            tx, ty = self.tau_x, self.tau_y
        else:
            tx, ty = float(self.tau_x), float(self.tau_y)
        return LieVector(
            self.a * v.vx + self.b * v.vy,
            self.c * v.vx + self.d * v.vy,
            tx * v.vx + ty * v.vy + v.vz,
        )

    def lie_power(self, k: int) -> Tuple[Tuple[Fraction, ...], ...]:
        """Exact 3x3 matrix of the k-th power of the differential."""
        return _lie_power(self, k)

    def push_vector(self, v: LieVector, k: int) -> LieVector:
        """Apply the k-th power of the differential to v."""
        P = self.lie_power(k)
        comps = (v.vx, v.vy, v.vz)
        exact = all(is_exact(c) for c in comps)
        rows = [tuple(entry if exact else float(entry) for entry in row) for row in P]
        return LieVector(*(sum(r[i] * comps[i] for i in range(3)) for r in rows))

    def iterate_cocycle(self, n: int) -> Cocycle:
        if n < 0:
            raise ValueError(f"iterate count must be nonnegative, got {n}")
        return _cocycle(self, n)

    def inverse(self) -> "PartialHypAuto":
        """Phi^{-1}, which belongs to the same family."""
        a, b, c, d = self.d, -self.b, -self.c, self.a
        tau_inv = -self.tau.compose(((a, b), (c, d)))
        ell = tau_inv.lx - a * c * HALF
        m = tau_inv.ly - b * d * HALF
        expected = (a * c * HALF, Fraction(b * c), b * d * HALF)
        if ell.denominator != 1 or m.denominator != 1 or (tau_inv.xx, tau_inv.xy, tau_inv.yy) != expected:
            raise ValueError("inverse automorphism is not of the canonical form")
        return build(a, b, c, d, int(ell), int(m), self.K)


def build(a: int, b: int, c: int, d: int, ell: int, m: int, K: int = 1) -> PartialHypAuto:
    """
    Validate integer data and return the automorphism with lam computed.

    Args:
        a, b, c, d: Entries of A = [[a, b], [c, d]]
        ell, m: Integer shifts in the linear part of the cocycle tau
        K: Lattice parameter

    Returns:
        PartialHypAuto with lam = (trace + sqrt(trace^2 - 4)) / 2

    Raises:
        DeterminantError: ad - bc != 1
        NotHyperbolicError: |trace| <= 2
        OrientationError: trace <= -3
    """
    for name, value in (("a", a), ("b", b), ("c", c), ("d", d), ("ell", ell), ("m", m), ("K", K)):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"{name} must be an integer, got {value!r}")
    if K < 1:
        raise ValueError(f"K must be positive, got {K}")
    det = a * d - b * c
    if det != 1:
        raise DeterminantError(f"ad - bc = {det}, expected 1")
    trace = a + d
    if abs(trace) <= 2:
        raise NotHyperbolicError(f"trace {trace} gives no hyperbolic splitting")
    if trace <= -3:
        raise OrientationError(f"trace {trace} gives negative eigenvalues")
    lam = (trace + math.sqrt(trace * trace - 4)) / 2
    auto = PartialHypAuto(a, b, c, d, ell, m, K, lam)
    logger.debug(f"Built automorphism {auto.matrix} ell={ell} m={m} K={K} lam={lam:.12f}")
    return auto


def _eigenvector(a: int, b: int, c: int, d: int, mu: float) -> np.ndarray:
    first = np.array([b, mu - a], dtype=float)
    second = np.array([mu - d, c], dtype=float)
    return first if np.linalg.norm(first) >= np.linalg.norm(second) else second


def compute_frame(auto: PartialHypAuto) -> Frame:
    """Frame coefficients from the eigenvectors of A."""
    a, b, c, d, lam = auto.a, auto.b, auto.c, auto.d, auto.lam
    u = _eigenvector(a, b, c, d, lam)
    u = u / np.linalg.norm(u)
    if u[0] < 0:
        u = -u
    alpha, beta = float(u[0]), float(u[1])
    s = _eigenvector(a, b, c, d, 1.0 / lam)
    # unit bracket: s_x * beta - s_y * alpha = 1
    s = s / (s[0] * beta - s[1] * alpha)
    tx, ty = float(auto.tau_x), float(auto.tau_y)
    gamma = (alpha * tx + beta * ty) / (lam - 1.0)
    gamma_prime = (float(s[0]) * tx + float(s[1]) * ty) / (1.0 - 1.0 / lam)
    return Frame(
        lam=lam,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        gamma_prime=gamma_prime,
        sigma_x=float(s[0]),
        sigma_y=float(s[1]),
    )


def frame(auto: PartialHypAuto) -> Frame:
    return auto.frame


def tau(auto: PartialHypAuto) -> Cocycle:
    return Cocycle(1, auto.tau, auto.matrix)


def apply(auto: PartialHypAuto, m: GroupElement) -> GroupElement:
    return auto.apply(m)


def iterate_cocycle(auto: PartialHypAuto, n: int) -> Cocycle:
    return auto.iterate_cocycle(n)


@lru_cache(maxsize=256)
def _cocycle(auto: PartialHypAuto, n: int) -> Cocycle:
    if n == 0:
        return Cocycle(0, QuadPoly(), IDENTITY_MATRIX)
    prev = _cocycle(auto, n - 1)
    return Cocycle(n, prev.tau + auto.tau.compose(prev.matrix), mat_mul(auto.matrix, prev.matrix))


@lru_cache(maxsize=256)
def _lie_power(auto: PartialHypAuto, k: int):
    if k == 0:
        return tuple(tuple(Fraction(int(i == j)) for j in range(3)) for i in range(3))
    base = (
        (Fraction(auto.a), Fraction(auto.b), Fraction(0)),
        (Fraction(auto.c), Fraction(auto.d), Fraction(0)),
        (auto.tau_x, auto.tau_y, Fraction(1)),
    )
    prev = _lie_power(auto, k - 1)
    return tuple(
        tuple(sum(base[i][l] * prev[l][j] for l in range(3)) for j in range(3))
        for i in range(3)
    )


def check_pushforward(
    auto: PartialHypAuto, frame: Frame, m: GroupElement, h: float
) -> PushforwardResidual:
    """Compare Phi along the frame flows with the rescaled flows at Phi(m).

    flow_* is the conjugacy defect divided by h; tangent_* is the difference
    quotient of Phi along the flow against the pushed-forward field, which is
    first order in h.
    """
    if not 0 < h <= 1e-4:
        raise ValueError(f"step must lie in (0, 1e-4], got {h}")
    m = m.to_float()
    lam = frame.lam
    image = auto.apply(m)
    out = {}
    for name, field, factor in (("v", frame.V, 1.0 / lam), ("w", frame.W, lam)):
        moved = auto.apply(flow(m, field, h))
        out[f"flow_{name}"] = distance(moved, flow(image, field, h * factor)) / h
        quotient = np.array([
            (moved.x - image.x) / h,
            (moved.y - image.y) / h,
            (moved.z - image.z) / h,
        ])
        expected = factor * np.array(field.at(image), dtype=float)
        out[f"tangent_{name}"] = float(np.max(np.abs(quotient - expected)))
    return PushforwardResidual(step=h, **out)


def check_renormalization(auto: PartialHypAuto, frame: Frame, m: GroupElement, t: Scalar) -> float:
    """Defect of Phi(flow(m, W, t)) = flow(Phi(m), W, lam t)."""
    W = frame.W
    return distance(auto.apply(flow(m, W, t)), flow(auto.apply(m), W, frame.lam * t))


def check_lattice_compatibility(auto: PartialHypAuto) -> bool:
    """Phi maps the lattice generators into the lattice."""
    K = auto.K
    generators = (
        GroupElement(Fraction(1), Fraction(0), Fraction(0)),
        GroupElement(Fraction(0), Fraction(1), Fraction(0)),
        GroupElement(Fraction(0), Fraction(0), Fraction(1, K)),
    )
    for gen in generators:
        image = auto.apply(gen)
        reduced = reduce(image, K)
        if reduced.point != GroupElement(0, 0, 0):
            return False
    return True
