"""Sector functions h(x, y, z) = exp(2 pi i N K z) f(x, y) built from theta-Hermite atoms.

For N != 0 a term (c, m, l) stands for

    c * exp(2 pi i l y) * sum_{|n| <= n_trunc} exp(2 pi i L n y) psi_m(x + n),   L = N K,

with psi_m the L2-normalized Hermite function of width one. For N = 0 a term
(c, kx, ky) is the torus mode c * exp(2 pi i (kx x + ky y)).
"""

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Tuple

import numpy as np
from scipy.special import eval_hermite

from nilspectra.exceptions import InvalidTruncation, SectorMismatch
from nilspectra.models import ObservableSpec
from nilspectra.services.heisenberg import GroupElement, LieVector, is_exact
from nilspectra.utils.logger import get_logger

logger = get_logger()

TWO_PI = 2.0 * math.pi
SQRT_PI = math.sqrt(math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)
MIN_TRUNCATION = 4
NORM_STEP = 1.0 / 64


def hermite_norm(m: int) -> float:
    """nu_m = 2^{1/4} / sqrt(2^m m!)."""
    return math.exp(0.25 * math.log(2.0) - 0.5 * (m * math.log(2.0) + math.lgamma(m + 1)))


def hermite_function(m: int, x) -> np.ndarray:
    """psi_m(x) = nu_m H_m(sqrt(2 pi) x) exp(-pi x^2)."""
    x = np.asarray(x, dtype=float)
    return hermite_norm(m) * eval_hermite(m, SQRT_2PI * x) * np.exp(-math.pi * x * x)


@dataclass(frozen=True)
class SectorTerm:
    coeff: complex
    m: int
    l: int  # noqa: E741


@dataclass(frozen=True)
class Component:
    """Schroedinger-model view of a term: coeff * psi_m(x - shift) in component r."""

    coeff: complex
    m: int
    r: int
    shift: int


@dataclass(frozen=True)
class SectorFunction:
    """Finite theta-Hermite combination in the sector C_N."""

    N: int
    K: int
    terms: Tuple[SectorTerm, ...]
    n_trunc: int = 8

    def __post_init__(self):
        if self.n_trunc < MIN_TRUNCATION:
            raise InvalidTruncation(f"n_trunc must be >= {MIN_TRUNCATION}, got {self.n_trunc}")
        if self.K < 1:
            raise ValueError(f"K must be positive, got {self.K}")
        if self.N != 0 and any(t.m < 0 for t in self.terms):
            raise ValueError("Hermite indices must be nonnegative")

    @property
    def L(self) -> int:
        return self.N * self.K

    @property
    def is_toral(self) -> bool:
        return self.N == 0

    # ------------------------------------------------------------ algebra

    def _check_same_sector(self, other: "SectorFunction"):
        if (self.N, self.K) != (other.N, other.K):
            raise SectorMismatch(
                f"sector (N={self.N}, K={self.K}) does not match (N={other.N}, K={other.K})"
            )

    def normalized(self) -> "SectorFunction":
        """Merge equal (m, l) terms, drop zeros, sort."""
        acc: Dict[Tuple[int, int], complex] = defaultdict(complex)
        for term in self.terms:
            acc[(term.m, term.l)] += complex(term.coeff)
        terms = tuple(
            SectorTerm(coeff, m, l) for (m, l), coeff in sorted(acc.items()) if coeff != 0
        )
        return SectorFunction(self.N, self.K, terms, self.n_trunc)

    def __add__(self, other: "SectorFunction") -> "SectorFunction":
        self._check_same_sector(other)
        return SectorFunction(self.N, self.K, self.terms + other.terms, self.n_trunc).normalized()

    def scale(self, c: complex) -> "SectorFunction":
        terms = tuple(SectorTerm(complex(c) * t.coeff, t.m, t.l) for t in self.terms)
        return SectorFunction(self.N, self.K, terms, self.n_trunc)

    __rmul__ = scale

    def __sub__(self, other: "SectorFunction") -> "SectorFunction":
        return self + other.scale(-1)

    def conj(self) -> "SectorFunction":
        """Complex conjugate, which lives in C_{-N}."""
        if self.is_toral:
            terms = tuple(SectorTerm(t.coeff.conjugate(), -t.m, -t.l) for t in self.terms)
        else:
            terms = tuple(SectorTerm(t.coeff.conjugate(), t.m, -t.l) for t in self.terms)
        return SectorFunction(-self.N, self.K, terms, self.n_trunc)

    def l2_norm(self) -> float:
        """L2 norm on the nilmanifold, via the Schroedinger-model components on the line."""
        merged = self.normalized()
        if self.is_toral:
            return math.sqrt(sum(abs(t.coeff) ** 2 for t in merged.terms))
        by_r: Dict[int, List[Component]] = defaultdict(list)
        for comp in merged.components():
            by_r[comp.r].append(comp)
        total = 0.0
        for comps in by_r.values():
            shifts = [c.shift for c in comps]
            degree = max(c.m for c in comps)
            reach = 6.0 + math.sqrt(degree + 1)
            # Gaussian tails make the plain Riemann sum spectrally accurate
            x = np.arange(min(shifts) - reach, max(shifts) + reach, NORM_STEP)
            values = sum(c.coeff * hermite_function(c.m, x - c.shift) for c in comps)
            total += float(np.sum(np.abs(values) ** 2)) * NORM_STEP
        return math.sqrt(total)

    def components(self) -> List[Component]:
        """Terms as shifted Hermite functions on the line, component index in [0, |L|)."""
        if self.is_toral:
            raise ValueError("the N = 0 sector has no Schroedinger-model components")
        L = self.L
        out = []
        for term in self.terms:
            r = term.l % abs(L)
            out.append(Component(complex(term.coeff), term.m, r, (term.l - r) // L))
        return out

    # ------------------------------------------------------------ evaluation

    def lattice_sum(self, x, y) -> np.ndarray:
        """f(x, y) from the truncated lattice sum, without reduction."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        if self.is_toral:
            for term in self.terms:
                out += term.coeff * np.exp(1j * TWO_PI * (term.m * x + term.l * y))
            return out
        by_m: Dict[int, List[SectorTerm]] = defaultdict(list)
        for term in self.terms:
            by_m[term.m].append(term)
        phases = {
            m: sum(t.coeff * np.exp(1j * TWO_PI * t.l * y) for t in group)
            for m, group in by_m.items()
        }
        L = self.L
        for n in range(-self.n_trunc, self.n_trunc + 1):
            twist = np.exp(1j * TWO_PI * ((L * n) * y))
            shifted = x + n
            for m, phase in phases.items():
                out += hermite_function(m, shifted) * phase * twist
        return out

    def evaluate_many(self, x, y, z) -> np.ndarray:
        """Float-mode evaluation of h at arrays of points."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        p = np.floor(x)
        x0 = x - p
        y0 = y - np.floor(y)
        L = self.L
        phase = np.mod(L * z - (L * p) * y0, 1.0)
        return self.lattice_sum(x0, y0) * np.exp(1j * TWO_PI * phase)

    def evaluate(self, m: GroupElement) -> complex:
        """h(m); rational points get their phase reduced mod 1 exactly."""
        if is_exact(m.x) and is_exact(m.y) and is_exact(m.z):
            x, y, z = Fraction(m.x), Fraction(m.y), Fraction(m.z)
            p = math.floor(x)
            x0 = x - p
            y0 = y - math.floor(y)
            phase = (self.L * (z - p * y0)) % 1
            value = self.lattice_sum(float(x0), float(y0))
            return complex(value * np.exp(1j * TWO_PI * float(phase)))
        return complex(self.evaluate_many(m.x, m.y, m.z))

    def __call__(self, m: GroupElement) -> complex:
        return self.evaluate(m)

    # ------------------------------------------------------------ derivatives

    def derivative(self, v: LieVector) -> "SectorFunction":
        """The left-invariant derivative v h, again a sector function."""
        vx, vy, vz = (complex(float(c)) for c in (v.vx, v.vy, v.vz))
        acc: Dict[Tuple[int, int], complex] = defaultdict(complex)
        if self.is_toral:
            for t in self.terms:
                acc[(t.m, t.l)] += t.coeff * 1j * TWO_PI * (vx * t.m + vy * t.l)
        else:
            L = self.L
            for t in self.terms:
                c, m, l = t.coeff, t.m, t.l
                # X: psi_m' = sqrt(pi) (sqrt(m) psi_{m-1} - sqrt(m+1) psi_{m+1})
                # Y: 2 pi i l + 2 pi i L x, with x psi_m = (sqrt(m+1) psi_{m+1} + sqrt(m) psi_{m-1}) / (2 sqrt(pi))
                up = math.sqrt(m + 1)
                down = math.sqrt(m)
                acc[(m + 1, l)] += c * SQRT_PI * up * (-vx + 1j * L * vy)
                if m > 0:
                    acc[(m - 1, l)] += c * SQRT_PI * down * (vx + 1j * L * vy)
                acc[(m, l)] += c * 1j * TWO_PI * (l * vy + L * vz)
        terms = tuple(SectorTerm(coeff, m, l) for (m, l), coeff in sorted(acc.items()) if coeff != 0)
        return SectorFunction(self.N, self.K, terms, self.n_trunc)

    def derivative_power(self, v: LieVector, j: int) -> "SectorFunction":
        out = self
        for _ in range(j):
            out = out.derivative(v)
        return out


def theta_atom(N: int, K: int, m: int, l: int, n_trunc: int = 8) -> SectorFunction:  # noqa: E741
    """Single-term sector function; for N = 0 the Hermite index is ignored."""
    if n_trunc < MIN_TRUNCATION:
        raise InvalidTruncation(f"n_trunc must be >= {MIN_TRUNCATION}, got {n_trunc}")
    if N == 0:
        return SectorFunction(0, K, (SectorTerm(1 + 0j, 0, l),), n_trunc)
    return SectorFunction(N, K, (SectorTerm(1 + 0j, m, l),), n_trunc)


def torus_mode(kx: int, ky: int, K: int = 1, n_trunc: int = 8) -> SectorFunction:
    """exp(2 pi i (kx x + ky y)) in the N = 0 sector."""
    return SectorFunction(0, K, (SectorTerm(1 + 0j, kx, ky),), n_trunc)


def combine(functions: Iterable[Tuple[complex, SectorFunction]]) -> SectorFunction:
    items = list(functions)
    if not items:
        raise ValueError("nothing to combine")
    total = items[0][1].scale(items[0][0])
    for coeff, fn in items[1:]:
        total = total + fn.scale(coeff)
    return total


def from_observable(spec: ObservableSpec, N: int, K: int, n_trunc: int = 8) -> SectorFunction:
    """Observable scaled to unit L2 norm."""
    terms = tuple(SectorTerm(term.coefficient, term.m, term.l) for term in spec.terms)
    merged = SectorFunction(N, K, terms, n_trunc).normalized()
    norm = merged.l2_norm()
    if norm == 0.0:
        raise ValueError("observable has zero norm")
    return merged.scale(1.0 / norm)


def evaluate(h: SectorFunction, m: GroupElement) -> complex:
    return h.evaluate(m)


def apply_vector_field(h: SectorFunction, v: LieVector) -> SectorFunction:
    return h.derivative(v)


def sample_grid(h: SectorFunction, M: int) -> np.ndarray:
    """f on {(j/M, k/M)}, indexed [j, k]; read-only and cached."""
    if M < 8:
        raise ValueError(f"grid size must be >= 8, got {M}")
    return _sample_grid(h, M)


@lru_cache(maxsize=64)
def _sample_grid(h: SectorFunction, M: int) -> np.ndarray:
    nodes = np.arange(M) / M
    xx, yy = np.meshgrid(nodes, nodes, indexing="ij")
    values = h.lattice_sum(xx, yy)
    values.setflags(write=False)
    logger.debug(f"Sampled sector function (N={h.N}, {len(h.terms)} terms) on {M}x{M} grid")
    return values
