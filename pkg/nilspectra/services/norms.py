"""One-dimensional test functions, the weighted C^r norm and mollification.

||f||_{C^r} = sup_{k <= r} 2^{r-k} |f^(k)|_inf, so that ||fg|| <= ||f|| ||g||.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.special import comb, roots_legendre

from nilspectra.models import CrNormValue, MollifierMarginRow
from nilspectra.utils.logger import get_logger

logger = get_logger()

CR_SAMPLES = 2 ** 14
MOLLIFIER_ORDER = 128


@lru_cache(maxsize=64)
def _legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_legendre(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(a: float, b: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    nodes, weights = _legendre(n)
    half = 0.5 * (b - a)
    return half * nodes + 0.5 * (a + b), half * weights


@lru_cache(maxsize=16)
def bump_polynomials(k_max: int) -> Tuple[Polynomial, ...]:
    """P_k with B^(k)(s) = P_k(s) (1 - s^2)^(-2k) B(s) for B(s) = exp(-1/(1 - s^2))."""
    w = Polynomial([1.0, 0.0, -1.0])
    s = Polynomial([0.0, 1.0])
    polys = [Polynomial([1.0])]
    for k in range(k_max):
        P = polys[-1]
        polys.append(w * w * P.deriv() + 4 * k * s * w * P - 2 * s * P)
    return tuple(polys)


def bump_derivative(k: int, s: np.ndarray) -> np.ndarray:
    """k-th derivative of exp(-1/(1 - s^2)), zero outside (-1, 1)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 - si * si
    P = bump_polynomials(k)[k]
    out[inside] = P(si) * np.exp(-1.0 / w - 2 * k * np.log(w))
    return out


class Smooth1D(ABC):
    """A smooth function on the line with derivatives on demand."""

    @property
    @abstractmethod
    def support(self) -> Tuple[float, float]:
        ...

    @abstractmethod
    def derivative(self, k: int, t) -> np.ndarray:
        ...

    def __call__(self, t) -> np.ndarray:
        return self.derivative(0, t)

    def __mul__(self, other: "Smooth1D") -> "Smooth1D":
        return Product(self, other)

    def __sub__(self, other: "Smooth1D") -> "Smooth1D":
        return Combination(((1.0, self), (-1.0, other)))


@dataclass(frozen=True)
class TestFunction(Smooth1D):
    """scale * B((t - center)/width) * exp(i (phase + omega u + chirp u^2)), u = t - center."""

    __test__ = False

    width: float
    omega: float = 0.0
    phase: float = 0.0
    chirp: float = 0.0
    scale: float = 1.0
    center: float = 0.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"width must be positive, got {self.width}")

    @property
    def support(self) -> Tuple[float, float]:
        return (self.center - self.width, self.center + self.width)

    def _modulation_polys(self, k: int) -> List[Polynomial]:
        theta_prime = Polynomial([self.omega + 0j, 2 * self.chirp + 0j])
        polys = [Polynomial([1.0 + 0j])]
        for _ in range(k):
            Q = polys[-1]
            polys.append(Q.deriv() + 1j * theta_prime * Q)
        return polys

    def derivative(self, k: int, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        u = t - self.center
        s = u / self.width
        carrier = np.exp(1j * (self.phase + self.omega * u + self.chirp * u * u))
        mods = self._modulation_polys(k)
        out = np.zeros(t.shape, dtype=complex)
        for j in range(k + 1):
            out += comb(k, j, exact=True) * bump_derivative(j, s) / self.width ** j * mods[k - j](u)
        return self.scale * out * carrier

    def dilate(self, factor: float) -> "TestFunction":
        """t -> eta(t / factor)."""
        return replace(
            self,
            width=self.width * factor,
            omega=self.omega / factor,
            chirp=self.chirp / factor ** 2,
            center=self.center * factor,
        )

    def modulate(self, omega: float, phase: float = 0.0) -> "TestFunction":
        return replace(self, omega=self.omega + omega, phase=self.phase + phase)

    def scaled(self, factor: float) -> "TestFunction":
        return replace(self, scale=self.scale * factor)

    def normalized(self, q: int) -> "TestFunction":
        """Rescale so that the certified C^q norm equals one."""
        return self.scaled(1.0 / cr_norm(self, q).upper)


@dataclass(frozen=True)
class Product(Smooth1D):
    left: Smooth1D
    right: Smooth1D

    @property
    def support(self) -> Tuple[float, float]:
        lo = max(self.left.support[0], self.right.support[0])
        hi = min(self.left.support[1], self.right.support[1])
        return (lo, max(lo, hi))

    def derivative(self, k: int, t) -> np.ndarray:
        total = 0
        for j in range(k + 1):
            total = total + comb(k, j, exact=True) * self.left.derivative(j, t) * self.right.derivative(k - j, t)
        return np.asarray(total, dtype=complex)


@dataclass(frozen=True)
class Combination(Smooth1D):
    terms: Tuple[Tuple[complex, Smooth1D], ...]

    @property
    def support(self) -> Tuple[float, float]:
        return (min(f.support[0] for _, f in self.terms), max(f.support[1] for _, f in self.terms))

    def derivative(self, k: int, t) -> np.ndarray:
        total = 0
        for c, f in self.terms:
            total = total + c * f.derivative(k, t)
        return np.asarray(total, dtype=complex)


@dataclass(frozen=True)
class FromDerivatives(Smooth1D):
    """Wrap a callable (k, t) -> f^(k)(t) on a fixed interval."""

    fn: Callable[[int, np.ndarray], np.ndarray] = field(compare=False)
    interval: Tuple[float, float] = (0.0, 1.0)

    @property
    def support(self) -> Tuple[float, float]:
        return self.interval

    def derivative(self, k: int, t) -> np.ndarray:
        return np.asarray(self.fn(k, np.asarray(t, dtype=float)), dtype=complex)


def cr_norm(f: Smooth1D, r: int, samples: int = CR_SAMPLES) -> CrNormValue:
    """Sampled C^r norm plus a Lipschitz-slack upper certificate.

    On a grid of spacing h, |g|_inf <= max_grid |g| + (h/2) |g'|_inf, with the
    derivative sup itself taken from the grid.
    """
    if r < 0:
        raise ValueError(f"order must be nonnegative, got {r}")
    lo, hi = f.support
    t = np.linspace(lo, hi, samples)
    step = (hi - lo) / (samples - 1) if samples > 1 else 0.0
    sups = [float(np.max(np.abs(f.derivative(k, t)))) for k in range(r + 2)]
    value = max(2.0 ** (r - k) * sups[k] for k in range(r + 1))
    upper = max(2.0 ** (r - k) * (sups[k] + 0.5 * step * sups[k + 1]) for k in range(r + 1))
    return CrNormValue(order=r, value=value, upper=upper)


@lru_cache(maxsize=1)
def mollifier_mass() -> float:
    """Z = int_{-1}^{1} exp(-1/(1 - x^2)) dx, about 0.443994."""
    value, _ = integrate.quad(lambda x: math.exp(-1.0 / (1.0 - x * x)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-14)
    return value


def mollifier(x) -> np.ndarray:
    """Standard mollifier, supported in |x| < 1 with unit mass."""
    x = np.asarray(x, dtype=float)
    return bump_derivative(0, x) / mollifier_mass()


@dataclass(frozen=True)
class Mollified(Smooth1D):
    """rho_eps * base, derivatives taken on the base under the integral."""

    base: Smooth1D
    eps: float
    order: int = MOLLIFIER_ORDER

    @property
    def support(self) -> Tuple[float, float]:
        lo, hi = self.base.support
        return (lo - self.eps, hi + self.eps)

    def derivative(self, k: int, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        nodes, weights = _legendre(self.order)
        kernel = weights * mollifier(nodes)
        shifted = t[..., None] - self.eps * nodes
        return self.base.derivative(k, shifted) @ kernel


def mollify(eta: Smooth1D, eps: float, order: int = MOLLIFIER_ORDER) -> Mollified:
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return Mollified(eta, eps, order)


def template_family(delta: float, count: int, q: int) -> List[TestFunction]:
    """Modulated bumps inside (-delta, delta), each normalized to unit C^q norm."""
    width = 0.95 * delta
    family = []
    for i in range(count):
        eta = TestFunction(width=width, omega=math.pi * i / delta, phase=0.25 * math.pi * i)
        family.append(eta.normalized(q))
    return family


def mollifier_margins(
    delta: float, q_max: int, epsilons: Sequence[float], modulations: int = 4
) -> List[MollifierMarginRow]:
    """Margins of the three mollifier bounds for unit C^q templates.

    ||eta - eta_eps||_{C^{q-1}} <= eps, ||eta_eps||_{C^q} <= 1, ||eta_eps||_{C^{q+1}} <= 2/eps.
    """
    rows = []
    for q in range(1, q_max + 1):
        family = template_family(delta, modulations, q)
        for eps in epsilons:
            approx = cq = cq1 = math.inf
            for eta in family:
                smooth = mollify(eta, eps)
                approx = min(approx, eps - cr_norm(eta - smooth, q - 1).value)
                cq = min(cq, 1.0 - cr_norm(smooth, q).value)
                cq1 = min(cq1, 2.0 / eps - cr_norm(smooth, q + 1).value)
            rows.append(MollifierMarginRow(
                q=q, epsilon=eps, approximation_margin=approx, cq_margin=cq, cq1_margin=cq1
            ))
            logger.debug(f"Mollifier q={q} eps={eps}: margins {approx:.3e} {cq:.3e} {cq1:.3e}")
    return rows
