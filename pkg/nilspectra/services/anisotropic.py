"""Leafwise functionals ell_{eta,m}(h) = int eta(t) h(m exp(tW)) dt and dictionary norm estimates.

Every norm reported here is a maximum over a finite dictionary of base points,
test functions and V-derivative orders, so it bounds the true supremum from
below and never from above.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.special import eval_hermite

from nilspectra.exceptions import QuadratureNotConverged
from nilspectra.models import (
    CheckStatus,
    DictionaryDescriptor,
    InequalityEntry,
    InequalityReport,
    InvariantThetaRow,
    NormEstimate,
    NormsConfig,
    Semantics,
    SlideRow,
    WindowRow,
)
from nilspectra.services.automorphism import Frame, PartialHypAuto
from nilspectra.services.heisenberg import GroupElement, LieVector, exp, flow, mul
from nilspectra.services.norms import Smooth1D, TestFunction, bump_derivative, gauss_legendre, template_family
from nilspectra.services.transfer import TransferEvaluator
from nilspectra.utils.logger import get_logger

logger = get_logger()

START_ORDER = 32
MAX_ORDER = 1024
QUAD_TOL = 1e-10
CHUNK = 512
TREND_BOUND = 4.0
MAX_ORDER_FACTOR = 16
TWO_PI = 2.0 * math.pi
SQRT_PI = math.sqrt(math.pi)


class LeafObservable(Protocol):
    def evaluate_many(self, x, y, z) -> np.ndarray:
        ...

    def derivative_power(self, v: LieVector, j: int) -> "LeafObservable":
        ...


def _leaf_values(h: LeafObservable, px, py, pz, field: LieVector, t: np.ndarray) -> np.ndarray:
    """h(m exp(t field)) for base points (P,) against nodes (Q,), shape (P, Q)."""
    base = GroupElement(np.asarray(px, dtype=float)[:, None], np.asarray(py, dtype=float)[:, None],
                        np.asarray(pz, dtype=float)[:, None])
    moved = flow(base, field.to_float(), np.asarray(t, dtype=float)[None, :])
    return h.evaluate_many(moved.x, moved.y, moved.z)


def _fixed_ell(eta: Smooth1D, m: GroupElement, h: LeafObservable, field: LieVector, order: int) -> complex:
    lo, hi = eta.support
    nodes, weights = gauss_legendre(lo, hi, order)
    m = m.to_float()
    values = _leaf_values(h, [m.x], [m.y], [m.z], field, nodes)[0]
    return complex(np.sum(values * weights * eta(nodes)))


def integrate_adaptive(fn: Callable[[int], complex], tol: float = QUAD_TOL,
                       start: int = START_ORDER, max_order: int = MAX_ORDER) -> Tuple[complex, int]:
    """Order doubling until two successive rules agree to tol (relative, floor one)."""
    previous = fn(start)
    order = start
    while order < max_order:
        order *= 2
        current = fn(order)
        if abs(current - previous) <= tol * max(1.0, abs(current)):
            return current, order
        previous = current
    raise QuadratureNotConverged(f"no agreement to {tol:g} by order {max_order}")


def ell(
    eta: Smooth1D,
    m: GroupElement,
    h: LeafObservable,
    field: LieVector,
    quad_order: Optional[int] = None,
    tol: float = QUAD_TOL,
) -> complex:
    """int eta(t) h(m exp(t field)) dt by Gauss-Legendre, order-doubled unless fixed."""
    if quad_order is not None:
        return _fixed_ell(eta, m, h, field, quad_order)
    value, order = integrate_adaptive(lambda n: _fixed_ell(eta, m, h, field, n), tol=tol)
    logger.debug(f"ell converged at order {order}")
    return value


def ell_batch(
    templates: Sequence[Smooth1D],
    px, py, pz,
    h: LeafObservable,
    field: LieVector,
    quad_order: int,
) -> np.ndarray:
    """ell for every (template, base point), shape (T, P); templates share one support."""
    lo, hi = templates[0].support
    nodes, weights = gauss_legendre(lo, hi, quad_order)
    kernel = np.stack([weights * eta(nodes) for eta in templates], axis=1)
    values = _leaf_values(h, px, py, pz, field, nodes)
    return (values @ kernel).T


def base_grid(n: int, K: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """n^3 points i/n of the fundamental domain; refining n by a factor keeps every old point."""
    ticks = np.arange(n) / n
    x, y, z = np.meshgrid(ticks, ticks, ticks / K, indexing="ij")
    return x.ravel(), y.ravel(), z.ravel()


def _dictionary_max(
    h: LeafObservable,
    templates: Sequence[Smooth1D],
    points: Tuple[np.ndarray, np.ndarray, np.ndarray],
    field: LieVector,
    quad_order: int,
    threads: int,
) -> float:
    px, py, pz = points
    chunks = [slice(i, i + CHUNK) for i in range(0, len(px), CHUNK)]

    def one(chunk: slice) -> float:
        values = ell_batch(templates, px[chunk], py[chunk], pz[chunk], h, field, quad_order)
        return float(np.max(np.abs(values)))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return max(pool.map(one, chunks), default=0.0)


def estimate_norm(
    h: LeafObservable,
    p: int,
    q: int,
    config: NormsConfig,
    frame: Frame,
    K: int,
    quad_order: Optional[int] = None,
    threads: int = 1,
) -> NormEstimate:
    """
    Dictionary lower bound of ||h||_{p,q} = sup |ell_{eta,m}(V^j h)|, j <= p, ||eta||_{C^q} <= 1.

    Args:
        h: Anything with evaluate_many and derivative_power
        p: Highest V-derivative order
        q: Smoothness of the test functions
        config: Dictionary size and template parameters
        frame: Adapted frame supplying V and W
        K: Lattice parameter for the base grid
        quad_order: Starting quadrature order, defaults to config.quad_order
        threads: Worker cap

    Returns:
        NormEstimate with the per-j maxima; value is their maximum
    """
    order = quad_order or config.quad_order
    templates = template_family(config.delta, config.modulations, q)
    points = base_grid(config.base_points, K)
    per_j = []
    current = h
    for j in range(p + 1):
        per_j.append(_dictionary_max(current, templates, points, frame.W, order, threads))
        if j < p:
            current = current.derivative_power(frame.V, 1)
    descriptor = DictionaryDescriptor(
        base_points_per_axis=config.base_points,
        modulations=config.modulations,
        delta=config.delta,
        width=templates[0].width,
        quad_order=order,
    )
    return NormEstimate(value=max(per_j), p=p, q=q, per_j=per_j, dictionary=descriptor)


def _order_for(auto: PartialHypAuto, k: int, base: int) -> int:
    """Leaves of L^k h oscillate lam^k faster; scale the rule, capped."""
    factor = 2 ** max(0, math.ceil(math.log2(auto.lam ** k)))
    return base * min(MAX_ORDER_FACTOR, factor)


def _entry(name: str, lhs: float, rhs: float, semantics: Semantics, detail: str,
           status: Optional[CheckStatus] = None) -> InequalityEntry:
    ratio = lhs / rhs if rhs > 0 else None
    if status is None:
        status = CheckStatus.PASS if lhs <= rhs else CheckStatus.FAIL
    return InequalityEntry(name=name, lhs=lhs, rhs=rhs, ratio=ratio, verdict=status,
                           semantics=semantics, detail=detail)


def inequality_experiments(
    auto: PartialHypAuto,
    h,
    config: NormsConfig,
    N: int,
    threads: int = 1,
) -> InequalityReport:
    """
    Dictionary estimates of the continuity, transfer-bound, contraction and two-norm inequalities.

    Args:
        auto: Automorphism supplying the frame and the transfer operator
        h: Sector function under test
        config: p, q, k_max and the dictionary
        N: Central Fourier index, which enters the W-continuity constant
        threads: Worker cap

    Returns:
        InequalityReport; only v-continuity carries exact-dictionary semantics
    """
    p, q, k_max = config.p, config.q, config.k_max
    frame = auto.frame
    K = auto.K
    cache: Dict[Tuple[int, int, int], NormEstimate] = {}

    def est(k: int, p_: int, q_: int, f=None) -> NormEstimate:
        key = (k, p_, q_)
        if f is None and key in cache:
            return cache[key]
        target = f if f is not None else (h if k == 0 else TransferEvaluator(auto, h, k))
        value = estimate_norm(target, p_, q_, config, frame, K, _order_for(auto, k, config.quad_order), threads)
        if f is None:
            cache[key] = value
        return value

    entries: List[InequalityEntry] = []

    base = est(0, p, q)
    shifted = estimate_norm(h.derivative_power(frame.V, 1), p - 1, q, config, frame, K, config.quad_order, threads)
    entries.append(_entry(
        "v-continuity", shifted.value, base.value, Semantics.EXACT_DICTIONARY,
        f"est(Vh; {p - 1},{q}) <= est(h; {p},{q}); same functionals, shifted j",
    ))

    constant = 2 * math.pi * K * abs(N) * p + 1
    w_est = estimate_norm(h.derivative_power(frame.W, 1), p, q + 1, config, frame, K, config.quad_order, threads)
    entries.append(_entry(
        "w-continuity/stated-constant", w_est.value, constant * base.value, Semantics.HEURISTIC,
        f"est(Wh; {p},{q + 1}) <= (2 pi K|N| p + 1) est(h; {p},{q})",
    ))
    finer = est(0, p, q + 1)
    proof_rhs = max(
        base.per_j[j] + (j * 2 * math.pi * K * abs(N) * finer.per_j[j - 1] if j else 0.0)
        for j in range(p + 1)
    )
    entries.append(_entry(
        "w-continuity/proof-line", w_est.value, proof_rhs, Semantics.HEURISTIC,
        "est(Wh) against max_j est(V^j h; 0,q) + j est(V^{j-1} Zh; 0,q+1)",
    ))

    for k in range(1, k_max + 1):
        lk = est(k, p, q)
        entries.append(_entry(
            f"transfer-bound/k={k}", lk.per_j[0], TREND_BOUND * base.per_j[0], Semantics.HEURISTIC,
            f"est(L^{k} h; 0,{q}) / est(h; 0,{q}) against {TREND_BOUND:g}",
        ))
        for j in range(1, p + 1):
            scaled = lk.per_j[j] * auto.lam ** (j * k)
            entries.append(_entry(
                f"contraction/j={j},k={k}", scaled, TREND_BOUND * base.per_j[j], Semantics.HEURISTIC,
                f"lam^(jk) est_j(L^{k} h) stays bounded",
            ))
        weak = est(0, p - 1, q + 1)
        rhs = auto.lam ** (-min(p, q) * k) * base.value + weak.value
        entries.append(_entry(
            f"lasota-yorke/k={k}", lk.value, rhs, Semantics.HEURISTIC,
            "ratio to lam^(-min(p,q)k) est(h;p,q) + est(h;p-1,q+1); constants unknown",
            status=CheckStatus.INFO,
        ))
        logger.debug(f"Inequality experiments finished k={k}")
    return InequalityReport(p=p, q=q, k_max=k_max, entries=entries)


# ---------------------------------------------------------------- slide / windows


def slide_defect(
    h: LeafObservable,
    eta: TestFunction,
    m: GroupElement,
    eps: float,
    frame: Frame,
    L: int,
    shifts: Sequence[Tuple[float, float, float]],
    quad_order: int = 256,
) -> float:
    """max |ell_{eta,m}(h) - ell_{eta~,m~}(h)| with m~ = m exp(aV) exp(bW) exp(cZ).

    (a, b) are eps times the unit shifts given; eta~(t) = exp(-2 pi i L (c + a t)) eta(t).
    """
    m = m.to_float()
    reference = _fixed_ell(eta, m, h, frame.W, quad_order)
    worst = 0.0
    V, W = frame.V, frame.W
    for ua, ub, c in shifts:
        a, b = eps * ua, eps * ub
        moved = mul(mul(mul(m, exp(V.scale(a))), exp(W.scale(b))), GroupElement(0.0, 0.0, c))
        twisted = eta.modulate(-2 * math.pi * L * a, -2 * math.pi * L * c)
        worst = max(worst, abs(reference - _fixed_ell(twisted, moved, h, W, quad_order)))
    return worst


def slide_table(
    h: LeafObservable,
    frame: Frame,
    L: int,
    config: NormsConfig,
    epsilons: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
    seed: int = 0,
    points: int = 4,
) -> List[SlideRow]:
    rng = np.random.default_rng(seed)
    eta = template_family(config.delta, 2, config.q)[1]
    bases = [GroupElement(*map(float, row)) for row in rng.random((points, 3))]
    shifts = [(float(a), float(b), float(c)) for a, b, c in
              zip(rng.uniform(-1, 1, 5), rng.uniform(-1, 1, 5), rng.random(5))]
    rows = []
    for eps in epsilons:
        defect = max(slide_defect(h, eta, m, eps, frame, L, shifts) for m in bases)
        rows.append(SlideRow(epsilon=eps, defect=defect))
    return rows


def _partition_weight(i: int, delta: float, t: np.ndarray) -> np.ndarray:
    """psi_i = g_i / sum_j g_j with g_j(t) = B((t - j delta)/delta)."""
    own = bump_derivative(0, (t - i * delta) / delta)
    total = sum(bump_derivative(0, (t - j * delta) / delta) for j in range(i - 2, i + 3))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, own / np.where(total > 0, total, 1.0), 0.0)


def window_split(
    h: LeafObservable,
    frame: Frame,
    m: GroupElement,
    delta: float,
    lengths: Sequence[float] = (0.4, 0.8, 1.6),
    q: int = 2,
) -> List[WindowRow]:
    """Split a long test function into delta-windows with a smooth partition of unity."""
    m = m.to_float()
    rows = []
    for length in lengths:
        if length < 2 * delta:
            raise ValueError(f"window length {length} shorter than 2 delta")
        eta = TestFunction(width=length / 2).normalized(q)
        lo, hi = eta.support
        direct, _ = integrate_adaptive(lambda n: _fixed_ell(eta, m, h, frame.W, n), tol=1e-12, start=64,
                                       max_order=8192)
        pieces = []
        for i in range(math.floor(lo / delta) - 1, math.ceil(hi / delta) + 2):
            a, b = max(lo, (i - 1) * delta), min(hi, (i + 1) * delta)
            if b <= a:
                continue

            def piece(n: int, i=i, a=a, b=b) -> complex:
                nodes, weights = gauss_legendre(a, b, n)
                values = _leaf_values(h, [m.x], [m.y], [m.z], frame.W, nodes)[0]
                return complex(np.sum(values * weights * eta(nodes) * _partition_weight(i, delta, nodes)))

            value, _ = integrate_adaptive(piece, tol=1e-12, start=64, max_order=4096)
            pieces.append(value)
        windowed = complex(sum(pieces))
        rows.append(WindowRow(
            length=length,
            direct=abs(direct),
            windowed=abs(windowed),
            split_error=abs(direct - windowed),
            abs_sum=float(sum(abs(v) for v in pieces)),
        ))
    return rows


def check_change_of_variables(
    auto: PartialHypAuto, h, eta: TestFunction, m: GroupElement, k: int
) -> Tuple[complex, complex, float]:
    """int eta(t) (L^k h)(m exp(tW)) dt against lam^-k int eta(s/lam^k) h(Phi^k(m) exp(sW)) ds."""
    frame = auto.frame
    m = m.to_float()
    lhs = ell(eta, m, TransferEvaluator(auto, h, k), frame.W)
    image = auto.iterate_cocycle(k).apply(m)
    rhs = ell(eta.dilate(auto.lam ** k), image, h, frame.W) / auto.lam ** k
    return lhs, rhs, abs(lhs - rhs)


# ---------------------------------------------------------------- V-invariant theta sums


class InvariantThetaSum:
    """Theta sum in C_N of a chirp annihilated by V, cut off by exp(-pi (t/R)^2).

    On component r of the line the function is w_r(t) chi_R(t) with

        w_r(t) = exp(-(2 pi i / v_x) (v_y (r t + L t^2 / 2) + v_z L t)),

    so V (w_r phi) = v_x w_r phi' for any phi and only cutoff derivatives
    survive: V^j acts as v_x^j chi_R^{(j)}. As R grows the sums approach the
    V-invariant distributions of the sector.
    """

    def __init__(self, V: LieVector, L: int, r: int, radius: float, order: int = 0):
        if L == 0:
            raise ValueError("the N = 0 sector carries no invariant theta sums")
        if radius <= 0.0:
            raise ValueError(f"cutoff radius must be positive, got {radius}")
        self.V = V.to_float()
        if abs(self.V.vx) < 1e-12:
            raise ValueError("V has no X component")
        self.L = L
        self.r = r % abs(L)
        self.radius = radius
        self.order = order
        self.reach = int(math.ceil(6.0 * radius)) + 2

    def component(self, t: np.ndarray) -> np.ndarray:
        vx, vy, vz = self.V.vx, self.V.vy, self.V.vz
        L, r, R = self.L, self.r, self.radius
        chirp = np.exp(-1j * TWO_PI / vx * (vy * (r * t + 0.5 * L * t * t) + vz * L * t))
        s = SQRT_PI * t / R
        # d^k/dt^k exp(-s^2) = (-sqrt(pi)/R)^k H_k(s) exp(-s^2)
        cutoff = (-SQRT_PI / R) ** self.order * eval_hermite(self.order, s) * np.exp(-s * s)
        return vx ** self.order * chirp * cutoff

    def lattice_sum(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape, dtype=complex)
        for n in range(-self.reach, self.reach + 1):
            out += np.exp(1j * TWO_PI * (self.r + self.L * n) * y) * self.component(x + n)
        return out

    def evaluate_many(self, x, y, z) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        p = np.floor(x)
        y0 = y - np.floor(y)
        phase = np.mod(self.L * z - (self.L * p) * y0, 1.0)
        return self.lattice_sum(x - p, y0) * np.exp(1j * TWO_PI * phase)

    def __call__(self, m: GroupElement) -> complex:
        m = m.to_float()
        return complex(self.evaluate_many(m.x, m.y, m.z))

    def derivative_power(self, v: LieVector, j: int) -> "InvariantThetaSum":
        v = v.to_float()
        if not np.allclose((v.vx, v.vy, v.vz), (self.V.vx, self.V.vy, self.V.vz), rtol=1e-12, atol=1e-14):
            raise ValueError("invariant theta sums only differentiate along their own V")
        return InvariantThetaSum(self.V, self.L, self.r, self.radius, self.order + j)


def invariant_theta_rows(
    auto: PartialHypAuto,
    N: int,
    config: NormsConfig,
    radii: Sequence[float] = (1.0, 2.0, 4.0),
    threads: int = 1,
) -> List[InvariantThetaRow]:
    """Dictionary estimates of cut-off V-invariant theta sums, one row per (component, radius).

    Args:
        auto: Automorphism whose frame supplies V and W
        N: Sector index; one component per residue class of N K
        config: Dictionary and p used for the estimates (q is fixed to one)
        radii: Cutoff radii, increasing
        threads: Worker cap for the dictionary sweep

    Returns:
        Rows with the per-j dictionary estimates. Nothing here is asserted:
        bounded j = 0 estimates and vanishing j >= 1 estimates as R grows
        are what membership of the invariant distributions would look like.
    """
    L = N * auto.K
    if L == 0:
        return []
    frame = auto.frame
    rows = []
    for r in range(abs(L)):
        for radius in radii:
            theta = InvariantThetaSum(frame.V, L, r, radius)
            estimate = estimate_norm(theta, config.p, 1, config, frame, auto.K, config.quad_order, threads)
            rows.append(InvariantThetaRow(component=r, radius=radius, per_j=estimate.per_j, value=estimate.value))
            logger.debug(f"Invariant theta sum r={r} R={radius:g}: {estimate.per_j}")
    return rows
