"""Exact Gaussian wave-packet propagation of the transfer operator on a sector.

In the Schroedinger model a sector function is a vector of |L| functions on
the line (L = N K) and one application of h -> h o Phi acts by an explicit
oscillatory kernel. A Gaussian packet

    w * exp(-pi a (x - X)^2 + 2 pi i P (x - X) + 2 pi i theta + rho)

is mapped to a sum of |L| packets of the same kind. The phase-space centre
(X, P) follows a rational affine map and theta a rational phase, so both are
tracked as Fractions; only the shape (a, rho) is floating point. Hermite
degrees are carried by the generating function
exp(-pi x^2 + 2 sqrt(2 pi) t x - t^2) = sum_m t^m / m! H_m(sqrt(2 pi) x) exp(-pi x^2).
"""

import cmath
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np

from nilspectra.exceptions import PrecisionWarning, SectorMismatch
from nilspectra.services.automorphism import PartialHypAuto
from nilspectra.services.sector import Component, SectorFunction, hermite_norm
from nilspectra.utils.logger import get_logger

logger = get_logger()

SIGMA = math.sqrt(2.0 / math.pi)
PACKET_BUDGET = 2 ** 16


@dataclass(frozen=True)
class PacketShape:
    """Shape shared by every packet after the same number of steps.

    beta1 and kappa2 are the t-linear and t-quadratic parts of the generating
    parameter; rho is the common log-amplitude.
    """

    a: complex = 1.0 + 0j
    beta1: complex = SIGMA + 0j
    kappa2: complex = -1.0 + 0j
    rho: complex = 0j


@dataclass(frozen=True)
class Packet:
    atom: int
    comp: int
    X: Fraction
    P: Fraction
    theta: Fraction
    weight: complex


class StepKernel:
    """Exact one-step data of the transfer operator on sector L = N K."""

    def __init__(self, auto: PartialHypAuto, N: int):
        if N == 0:
            raise ValueError("wave packets need a nonzero sector")
        self.auto = auto
        self.L = N * auto.K
        self.size = abs(self.L)
        a, b, c, d, ell, m = auto.a, auto.b, auto.c, auto.d, auto.ell, auto.m
        L = self.L
        self.psi_x: Dict[Tuple[int, int], Fraction] = {}
        self.psi_u: Dict[Tuple[int, int], Fraction] = {}
        self.gauss: Dict[Tuple[int, int], complex] = {}
        for j in range(self.size):
            for r in range(self.size):
                self.psi_x[(j, r)] = (
                    L * (Fraction(a * (c - d), 2) + ell - Fraction(a * m, b)) + Fraction(j * a - r, b)
                )
                self.psi_u[(j, r)] = Fraction(L * d, 2) + Fraction(L * m - j + r * d, b)
                total = 0j
                for rho in range(abs(b)):
                    psi0 = (
                        -Fraction(L * d * rho * rho, 2 * b)
                        - Fraction(L * d * rho, 2)
                        + Fraction(rho * (j - L * m - r * d), b)
                    )
                    total += cmath.exp(2j * math.pi * float(psi0 % 1))
                self.gauss[(j, r)] = total / abs(b)

    def step_shape(self, shape: PacketShape) -> PacketShape:
        a, b, d = self.auto.a, self.auto.b, self.auto.d
        ratio = self.L / b
        A = shape.a - 1j * self.L * d / b
        return PacketShape(
            a=ratio * ratio / A - 1j * self.L * a / b,
            beta1=-1j * ratio * shape.beta1 / A,
            kappa2=shape.kappa2 + math.pi * shape.beta1 ** 2 / A,
            rho=shape.rho - 0.5 * cmath.log(A),
        )

    def step_packets(self, packets: Sequence[Packet]) -> List[Packet]:
        a, b, c, d = self.auto.a, self.auto.b, self.auto.c, self.auto.d
        L = self.L
        scale = Fraction(b, L)
        quad = Fraction(L, 2 * b)
        out = []
        for packet in packets:
            X, P = packet.X, packet.P
            for j in range(self.size):
                weight = self.gauss[(j, packet.comp)]
                if abs(weight) < 1e-15:
                    continue
                psi_x = self.psi_x[(j, packet.comp)]
                psi_u = self.psi_u[(j, packet.comp)]
                X_new = d * X + scale * (P + psi_u)
                P_new = L * c * X + a * P + a * psi_u + psi_x
                phase = quad * (a * X_new * X_new - 2 * X_new * X + d * X * X) + psi_x * X_new + psi_u * X
                out.append(Packet(
                    atom=packet.atom,
                    comp=j,
                    X=X_new,
                    P=P_new,
                    theta=(packet.theta + phase) % 1,
                    weight=packet.weight * weight,
                ))
        return out


def initial_packets(components: Sequence[Component]) -> List[Packet]:
    return [
        Packet(atom=i, comp=comp.r, X=Fraction(comp.shift), P=Fraction(0), theta=Fraction(0), weight=1 + 0j)
        for i, comp in enumerate(components)
    ]


def propagate(kernel: StepKernel, packets: List[Packet], steps: int) -> List[Tuple[PacketShape, List[Packet]]]:
    """Packets after 0..steps applications of the kernel."""
    shape = PacketShape()
    history = [(shape, packets)]
    for _ in range(steps):
        shape = kernel.step_shape(shape)
        packets = kernel.step_packets(packets)
        history.append((shape, packets))
    return history


def _taylor_coefficients(q10, q01, q20, q11, q02, max_s: int, max_t: int) -> np.ndarray:
    """Coefficients of exp(q10 s + q01 t + q20 s^2 + q11 s t + q02 t^2), elementwise over arrays."""
    shape = np.shape(q10)
    e = np.zeros(shape + (max_s + 1, max_t + 1), dtype=complex)
    e[..., 0, 0] = 1.0
    for j in range(max_t):
        term = q01 * e[..., 0, j]
        if j > 0:
            term = term + 2 * q02 * e[..., 0, j - 1]
        e[..., 0, j + 1] = term / (j + 1)
    for i in range(max_s):
        for j in range(max_t + 1):
            term = q10 * e[..., i, j]
            if i > 0:
                term = term + 2 * q20 * e[..., i - 1, j]
            if j > 0:
                term = term + q11 * e[..., i, j - 1]
            e[..., i + 1, j] = term / (i + 1)
    return e


def pair_matrix(
    g_state: Tuple[PacketShape, List[Packet]],
    h_state: Tuple[PacketShape, List[Packet]],
    g_orders: Sequence[int],
    h_orders: Sequence[int],
    size: int,
) -> np.ndarray:
    """Matrix of <psi-atom_g, psi-atom_h> between propagated atom sets."""
    shape_g, packets_g = g_state
    shape_h, packets_h = h_state
    out = np.zeros((len(g_orders), len(h_orders)), dtype=complex)
    max_s, max_t = max(g_orders), max(h_orders)
    a1 = np.conj(shape_g.a)
    a2 = shape_h.a
    D = a1 + a2
    Bs = np.conj(shape_g.beta1)
    Bt = shape_h.beta1
    q20 = math.pi * Bs * Bs / D + np.conj(shape_g.kappa2)
    q11 = 2 * math.pi * Bs * Bt / D
    q02 = math.pi * Bt * Bt / D + shape_h.kappa2
    base = -0.5 * cmath.log(D) + np.conj(shape_g.rho) + shape_h.rho
    norms_g = np.array([hermite_norm(m) * math.factorial(m) for m in g_orders])
    norms_h = np.array([hermite_norm(m) * math.factorial(m) for m in h_orders])

    for r in range(size):
        gs = [p for p in packets_g if p.comp == r]
        hs = [p for p in packets_h if p.comp == r]
        if not gs or not hs:
            continue
        delta = np.empty((len(gs), len(hs)))
        exact_phase = np.empty((len(gs), len(hs)))
        for i, pg in enumerate(gs):
            for k, ph in enumerate(hs):
                gap = ph.X - pg.X
                delta[i, k] = float(gap)
                exact_phase[i, k] = float((ph.theta - pg.theta - pg.P * gap) % 1)
        Pg = np.array([float(p.P) for p in gs])[:, None]
        Ph = np.array([float(p.P) for p in hs])[None, :]
        B0 = -a1 * delta - 1j * Pg + 1j * Ph
        q00 = base + math.pi * B0 * B0 / D - math.pi * a1 * delta * delta + 2j * math.pi * exact_phase
        q10 = 2 * math.pi * B0 * Bs / D + 2 * math.pi * Bs * delta
        q01 = 2 * math.pi * B0 * Bt / D
        coeffs = _taylor_coefficients(
            q10, q01, np.full_like(q10, q20), np.full_like(q10, q11), np.full_like(q10, q02), max_s, max_t
        )
        atoms_g = np.array([p.atom for p in gs])
        atoms_h = np.array([p.atom for p in hs])
        orders_g = np.asarray(g_orders)[atoms_g][:, None]
        orders_h = np.asarray(h_orders)[atoms_h][None, :]
        rows = np.broadcast_to(np.arange(len(gs))[:, None], delta.shape)
        cols = np.broadcast_to(np.arange(len(hs))[None, :], delta.shape)
        picked = coeffs[rows, cols, np.broadcast_to(orders_g, delta.shape), np.broadcast_to(orders_h, delta.shape)]
        weights = np.conj(np.array([p.weight for p in gs]))[:, None] * np.array([p.weight for p in hs])[None, :]
        values = weights * np.exp(q00) * picked
        np.add.at(
            out,
            (np.broadcast_to(atoms_g[:, None], delta.shape), np.broadcast_to(atoms_h[None, :], delta.shape)),
            values,
        )
    return out * norms_g[:, None] * norms_h[None, :]


def packet_correlations(
    auto: PartialHypAuto, g: SectorFunction, h: SectorFunction, n_max: int, threads: int = 1
) -> np.ndarray:
    """C_n = <g, h o Phi^n> for n = 0..n_max, split as <L^{-floor(n/2)} g, L^{ceil(n/2)} h>."""
    if (g.N, g.K) != (h.N, h.K) or g.K != auto.K:
        raise SectorMismatch("observables and automorphism must share (N, K)")
    forward = StepKernel(auto, h.N)
    backward = StepKernel(auto.inverse(), h.N)
    size = forward.size
    steps_h = n_max - n_max // 2
    steps_g = n_max // 2
    expected = max(len(g.terms), len(h.terms)) * size ** max(steps_g, steps_h)
    if expected > PACKET_BUDGET:
        message = f"about {expected} packets per side exceeds the budget of {PACKET_BUDGET}"
        logger.warning(message)
        warnings.warn(message, PrecisionWarning, stacklevel=2)

    comps_g = g.components()
    comps_h = h.components()
    with ThreadPoolExecutor(max_workers=max(1, min(threads, 2))) as pool:
        fut_g = pool.submit(propagate, backward, initial_packets(comps_g), steps_g)
        fut_h = pool.submit(propagate, forward, initial_packets(comps_h), steps_h)
        history_g, history_h = fut_g.result(), fut_h.result()
    logger.debug(
        f"Propagated packets: {len(history_h[-1][1])} forward, {len(history_g[-1][1])} backward"
    )

    coeff_g = np.array([c.coeff for c in comps_g])
    coeff_h = np.array([c.coeff for c in comps_h])
    orders_g = [c.m for c in comps_g]
    orders_h = [c.m for c in comps_h]

    def one(n: int) -> complex:
        matrix = pair_matrix(history_g[n // 2], history_h[n - n // 2], orders_g, orders_h, size)
        return complex(np.conj(coeff_g) @ matrix @ coeff_h)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        values = list(pool.map(one, range(n_max + 1)))
    return np.array(values, dtype=complex)


