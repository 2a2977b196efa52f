"""The transfer operator h -> h o Phi on sector functions and correlation series."""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from nilspectra.exceptions import PrecisionWarning, SectorMismatch
from nilspectra.models import (
    CorrelationMetadata,
    CorrelationSeries,
    EngineKind,
    ObservableSpec,
    ObservableTerm,
)
from nilspectra.services.automorphism import PartialHypAuto, mat_mul, mat_transpose
from nilspectra.services.heisenberg import GroupElement, LieVector, Z, flow
from nilspectra.services.sector import SectorFunction, sample_grid
from nilspectra.services.wavepackets import packet_correlations
from nilspectra.utils.logger import get_logger

logger = get_logger()

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TransferEvaluator:
    """Pointwise evaluator of h o Phi^k."""

    auto: PartialHypAuto
    h: SectorFunction
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"iteration count must be nonnegative, got {self.k}")

    @property
    def N(self) -> int:
        return self.h.N

    def evaluate(self, m: GroupElement) -> complex:
        return self.h.evaluate(self.auto.iterate_cocycle(self.k).apply(m))

    __call__ = evaluate

    def evaluate_many(self, x, y, z) -> np.ndarray:
        image = self.auto.iterate_cocycle(self.k).apply(
            GroupElement(np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(z, dtype=float))
        )
        return self.h.evaluate_many(image.x, image.y, image.z)

    def derivative(self, v: LieVector) -> "TransferEvaluator":
        """v (h o Phi^k) = ((Phi^k)_* v h) o Phi^k."""
        return TransferEvaluator(self.auto, self.h.derivative(self.auto.push_vector(v, self.k)), self.k)

    def derivative_power(self, v: LieVector, j: int) -> "TransferEvaluator":
        out = self
        for _ in range(j):
            out = out.derivative(v)
        return out


@dataclass(frozen=True)
class IntertwiningResidual:
    j: int
    k: int
    v: float
    w: float
    z: float

    @property
    def worst(self) -> float:
        return max(self.v, self.w, self.z)


def transfer_apply(auto: PartialHypAuto, h: SectorFunction, k: int) -> TransferEvaluator:
    if h.K != auto.K:
        raise SectorMismatch(f"observable lattice K={h.K} differs from automorphism K={auto.K}")
    return TransferEvaluator(auto, h, k)


def _relative_gap(lhs: np.ndarray, rhs: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(rhs))), float(np.max(np.abs(lhs))), 1e-300)
    return float(np.max(np.abs(lhs - rhs))) / scale


def check_intertwining(
    auto: PartialHypAuto, h: SectorFunction, j: int, k: int, points: Sequence[GroupElement]
) -> IntertwiningResidual:
    """Relative residuals of V^j L^k h = lam^{-jk} L^k V^j h, the W analogue and the Z analogue."""
    if not (0 <= j <= 2 and 0 <= k <= 4):
        raise ValueError(f"need 0 <= j <= 2 and 0 <= k <= 4, got j={j}, k={k}")
    frame = auto.frame
    base = transfer_apply(auto, h, k)
    out = {}
    for name, field, factor in (("v", frame.V, auto.lam ** (-j * k)), ("w", frame.W, auto.lam ** (j * k))):
        lhs = base.derivative_power(field, j)
        rhs = TransferEvaluator(auto, h.derivative_power(field, j), k)
        lhs_values = np.array([lhs(p) for p in points])
        rhs_values = factor * np.array([rhs(p) for p in points])
        out[name] = _relative_gap(lhs_values, rhs_values) if j else 0.0
    z_lhs = np.array([base.derivative_power(Z, j)(p) for p in points])
    z_rhs = np.array([TransferEvaluator(auto, h.derivative_power(Z, j), k)(p) for p in points])
    out["z"] = _relative_gap(z_lhs, z_rhs) if j else 0.0
    logger.debug(f"Intertwining j={j} k={k}: {out}")
    return IntertwiningResidual(j=j, k=k, **out)


def flow_derivative(evaluator, v: LieVector, m: GroupElement, step: float = 1e-5) -> complex:
    """Central difference of t -> evaluator(m exp(t v)) at t = 0."""
    m = m.to_float()
    v = v.to_float()
    return (evaluator(flow(m, v, step)) - evaluator(flow(m, v, -step))) / (2.0 * step)


# ---------------------------------------------------------------- engines


def _trapezoid_term(auto: PartialHypAuto, samples_g: np.ndarray, samples_h: np.ndarray, n: int, M: int, L: int) -> complex:
    """Mean of conj(f_g) e^{2 pi i L tau_n} f_h(A^n .) over the grid with integer phases."""
    cocycle = auto.iterate_cocycle(n)
    (a, b), (c, d) = cocycle.matrix
    MM = M * M
    mod2 = 2 * MM
    j = np.arange(M, dtype=np.int64)[:, None]
    k = np.arange(M, dtype=np.int64)[None, :]
    # U mod M^2 determines both the reduced index and floor(U / M) mod M
    U = ((a % MM) * j + (b % MM) * k) % MM
    V = ((c % M) * j + (d % M) * k) % M
    j_new = U % M
    P = U // M
    cxx, cxy, cyy, cx, cy = (int(coeff) % mod2 for coeff in cocycle.tau.doubled())
    # 2 M^2 tau_n(j/M, k/M) = cxx j^2 + cxy j k + cyy k^2 + M (cx j + cy k)
    num = (cxx * ((j * j) % mod2)) % mod2
    num = (num + (cxy * ((j * k) % mod2)) % mod2) % mod2
    num = (num + (cyy * ((k * k) % mod2)) % mod2) % mod2
    num = (num + (cx * M % mod2) * j + (cy * M % mod2) * k) % mod2
    twist = (-(L % M) * ((P * V) % M)) % M
    total = ((L % mod2) * num + 2 * M * twist) % mod2
    phase = np.exp(1j * TWO_PI * (total.astype(float) / mod2))
    integrand = np.conj(samples_g) * phase * samples_h[j_new, V]
    return complex(np.mean(integrand))


def trapezoid_correlations(
    auto: PartialHypAuto, g: SectorFunction, h: SectorFunction, n_max: int, M: int, threads: int = 1
) -> np.ndarray:
    if auto.lam ** n_max > M / 8:
        message = f"lam^{n_max} = {auto.lam ** n_max:.3g} exceeds M/8 = {M / 8:g}; trapezoid aliasing expected"
        logger.warning(message)
        warnings.warn(message, PrecisionWarning, stacklevel=3)
    samples_g = sample_grid(g, M)
    samples_h = sample_grid(h, M)
    L = h.L
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        values = list(pool.map(lambda n: _trapezoid_term(auto, samples_g, samples_h, n, M, L), range(n_max + 1)))
    return np.array(values, dtype=complex)


def mode_correlations(auto: PartialHypAuto, g: SectorFunction, h: SectorFunction, n_max: int) -> np.ndarray:
    """Exact torus-mode algebra: e_k o A^n = e_{(A^n)^T k}."""
    if not (g.is_toral and h.is_toral):
        raise SectorMismatch("the modes engine needs N = 0 observables")
    g_norm, h_norm = g.normalized(), h.normalized()
    values = []
    power = ((1, 0), (0, 1))
    for _ in range(n_max + 1):
        (a, b), (c, d) = mat_transpose(power)
        total = 0j
        for th in h_norm.terms:
            image = (a * th.m + b * th.l, c * th.m + d * th.l)
            for tg in g_norm.terms:
                if (tg.m, tg.l) == image:
                    total += tg.coeff.conjugate() * th.coeff
        values.append(total)
        power = mat_mul(auto.matrix, power)
    return np.array(values, dtype=complex)


def resolve_engine(engine: EngineKind, N: int) -> EngineKind:
    if engine == EngineKind.AUTO:
        return EngineKind.MODES if N == 0 else EngineKind.PACKETS
    if engine == EngineKind.MODES and N != 0:
        raise ValueError("the modes engine is defined for N = 0 only")
    if engine == EngineKind.PACKETS and N == 0:
        raise ValueError("the packets engine needs N != 0")
    return engine


def observable_spec(f: SectorFunction) -> ObservableSpec:
    return ObservableSpec(terms=[
        ObservableTerm(re=t.coeff.real, im=t.coeff.imag, m=t.m, l=t.l) for t in f.terms
    ])


def correlate(
    auto: PartialHypAuto,
    g: SectorFunction,
    h: SectorFunction,
    n_max: int = 12,
    M: int = 256,
    engine: EngineKind = EngineKind.AUTO,
    threads: int = 1,
    g_spec: Optional[ObservableSpec] = None,
    h_spec: Optional[ObservableSpec] = None,
) -> CorrelationSeries:
    """
    Correlation series C_n = <g, h o Phi^n> = int conj(g) h o Phi^n for n = 0..n_max.

    Args:
        auto: Automorphism Phi
        g: Left observable, same sector as h
        h: Observable transported by Phi
        n_max: Last iterate
        M: Grid size for the trapezoid engine
        engine: Engine choice; auto picks modes for N = 0 and packets otherwise
        threads: Worker cap
        g_spec: Observable spec to record in the metadata instead of the derived one
        h_spec: Same for h

    Returns:
        CorrelationSeries with n_max + 1 entries and the run metadata

    Raises:
        SectorMismatch: g, h and auto disagree on N or K
    """
    if (g.N, g.K) != (h.N, h.K):
        raise SectorMismatch(f"g lives in (N={g.N}, K={g.K}) but h in (N={h.N}, K={h.K})")
    if g.K != auto.K:
        raise SectorMismatch(f"observables use K={g.K}, automorphism K={auto.K}")
    if M < 64:
        raise ValueError(f"grid must be at least 64, got {M}")
    if n_max < 0:
        raise ValueError(f"n_max must be nonnegative, got {n_max}")
    chosen = resolve_engine(EngineKind(engine), h.N)
    logger.info(f"Correlating n=0..{n_max} with the {chosen.value} engine (N={h.N}, K={h.K})")

    if chosen == EngineKind.PACKETS:
        values = packet_correlations(auto, g, h, n_max, threads)
    elif chosen == EngineKind.MODES:
        values = mode_correlations(auto, g, h, n_max)
    else:
        values = trapezoid_correlations(auto, g, h, n_max, M, threads)

    metadata = CorrelationMetadata(
        automorphism=auto.spec(),
        K=auto.K,
        N=h.N,
        g=g_spec or observable_spec(g),
        h=h_spec or observable_spec(h),
        grid=M,
        n_trunc=h.n_trunc,
        engine=chosen,
    )
    return CorrelationSeries.from_values(values, metadata)


def random_points(rng: np.random.Generator, count: int) -> List[GroupElement]:
    """Float sample points in the fundamental domain."""
    xyz = rng.random((count, 3))
    return [GroupElement(float(x), float(y), float(z)) for x, y, z in xyz]
