"""Resonance extraction by Hankel matrix pencil and band-structure verification."""

import math
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import hankel, pinv, svd

from nilspectra.exceptions import IllConditioned, TooShort
from nilspectra.models import (
    BandVerdict,
    CheckResult,
    CheckStatus,
    CorrelationSeries,
    DecayEstimate,
    Resonance,
    ResonanceReport,
    ToleranceConfig,
)
from nilspectra.utils.logger import get_logger

logger = get_logger()

MIN_LENGTH = 6
MAX_BAND = 6
NOISE_FLOOR = 1e-9
MIN_PEAKS = 3

SeriesLike = Union[CorrelationSeries, Sequence[complex], np.ndarray]


def _values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, CorrelationSeries):
        return series.values()
    return np.asarray(series, dtype=complex)


def pencil_fit(
    series: SeriesLike, rank_tol: float = 1e-10, start: int = 0, order: Optional[int] = None
) -> ResonanceReport:
    """Fit C_n ~ sum_j c_j xi_j^n on n >= start.

    The row space of the Hankel matrix is spanned by Vandermonde rows, so the
    shift between its leading right singular vectors has the xi_j as
    eigenvalues. Amplitudes come from a least-squares Vandermonde solve.

    Args:
        series: CorrelationSeries or raw complex values
        rank_tol: Singular values below rank_tol * sigma_max are dropped
        start: First index used by the fit
        order: Fixed model order; overrides rank_tol

    Returns:
        ResonanceReport sorted by decreasing modulus, with residuals over the whole series

    Raises:
        TooShort: fewer than six samples after start
        IllConditioned: the series is identically zero
    """
    if not 0.0 < rank_tol < 1.0:
        raise ValueError(f"rank_tol must lie in (0, 1), got {rank_tol}")
    full = _values(series)
    data = full[start:]
    if len(data) < MIN_LENGTH:
        raise TooShort(f"need at least {MIN_LENGTH} samples after start={start}, got {len(data)}")

    size = len(data)
    window = size // 2
    H = hankel(data[: size - window], data[size - window - 1:])
    _, sigma, Wh = svd(H)
    if sigma[0] == 0.0:
        raise IllConditioned("correlation series is identically zero")
    if order is None:
        rank = int(np.sum(sigma > rank_tol * sigma[0]))
    else:
        rank = order
    rank = max(1, min(rank, window))
    logger.debug(f"Pencil: hankel {H.shape}, rank {rank}, sigma {np.array2string(sigma, precision=3)}")

    W0 = Wh[:rank, :window]
    W1 = Wh[:rank, 1: window + 1]
    xi = np.linalg.eigvals(pinv(W0.T) @ W1.T)

    exponents = np.arange(start, len(full))[:, None]
    vandermonde = np.power(xi[None, :], exponents)
    amplitudes, *_ = np.linalg.lstsq(vandermonde, data, rcond=None)

    order_idx = sorted(range(rank), key=lambda i: (-abs(xi[i]), -xi[i].imag, i))
    xi = xi[order_idx]
    amplitudes = amplitudes[order_idx]

    model = np.power(xi[None, :], np.arange(len(full))[:, None]) @ amplitudes
    residuals = np.abs(full - model)

    resonances = [
        Resonance(
            re=float(x.real),
            im=float(x.imag),
            modulus=float(abs(x)),
            amp_re=float(c.real),
            amp_im=float(c.imag),
        )
        for x, c in zip(xi, amplitudes)
    ]
    return ResonanceReport(
        resonances=resonances,
        residuals=[float(r) for r in residuals],
        singular_values=[float(s) for s in sigma],
        rank=rank,
        start=start,
        rank_tol=rank_tol,
    )


def band_modulus(lam: float, band: int) -> float:
    return lam ** -(0.5 + band)


def assign_bands(report: ResonanceReport, lam: float, tolerances: ToleranceConfig) -> ResonanceReport:
    """Label each resonance with its band and recover mu = lam^{band + 1/2} xi."""
    labelled = []
    for res in report.resonances:
        band = None
        for n in range(MAX_BAND + 1):
            target = band_modulus(lam, n)
            if abs(res.modulus - target) <= tolerances.for_band(n) * target:
                band = n
                break
        update = {"band": band, "mu_re": None, "mu_im": None}
        if band is not None:
            mu = res.xi * lam ** (band + 0.5)
            update.update(mu_re=float(mu.real), mu_im=float(mu.imag))
        labelled.append(res.model_copy(update=update))
    return report.model_copy(update={"resonances": labelled, "lam": lam})


def _check(name: str, ok: bool, margin: Optional[float], detail: str) -> CheckResult:
    return CheckResult(name=name, status=CheckStatus.PASS if ok else CheckStatus.FAIL, margin=margin, detail=detail)


def _distinct(values: Iterable[complex], tol: float) -> List[complex]:
    out: List[complex] = []
    for value in values:
        if all(abs(value - seen) > tol for seen in out):
            out.append(value)
    return out


def band_analysis(
    report: ResonanceReport,
    lam: float,
    N: int,
    K: int,
    tolerances: Optional[ToleranceConfig] = None,
    alt_report: Optional[ResonanceReport] = None,
) -> BandVerdict:
    """
    Structured pass/fail verdict on the band structure of a fitted report.

    Args:
        report: Fitted resonances of the main pair
        lam: Unstable eigenvalue
        N: Central Fourier index; N = 0 switches to the toral verdict
        K: Lattice parameter, which bounds the band-0 count by K|N|
        tolerances: Band, modulus and agreement tolerances
        alt_report: Fitted resonances of the alternative pair, enabling pair_agreement

    Returns:
        BandVerdict with one CheckResult per check
    """
    tolerances = tolerances or ToleranceConfig()
    if N == 0:
        return toral_analysis(report, tolerances)
    report = assign_bands(report, lam, tolerances)
    checks: List[CheckResult] = []

    band0 = report.in_band(0)
    band1 = report.in_band(1)
    target0 = band_modulus(lam, 0)

    if band0:
        worst = max(abs(r.modulus - target0) for r in band0)
        checks.append(_check(
            "band0_modulus",
            worst <= tolerances.modulus_abs,
            tolerances.modulus_abs - worst,
            f"max | |xi| - lam^-1/2 | = {worst:.3e} (target {target0:.10f})",
        ))
    else:
        checks.append(_check("band0_modulus", False, None, f"no resonance near {target0:.10f}"))

    distinct0 = _distinct((r.xi for r in band0), tolerances.pair_agreement)
    bound = K * abs(N)
    checks.append(_check(
        "band0_count",
        1 <= len(distinct0) <= bound,
        float(bound - len(distinct0)),
        f"{len(distinct0)} distinct band-0 resonances, bound K|N| = {bound}",
    ))

    if band0:
        worst_mu = max(abs(abs(r.mu) - 1.0) for r in band0)
        checks.append(_check(
            "unit_mu",
            worst_mu <= tolerances.unit_mu,
            tolerances.unit_mu - worst_mu,
            "max | |mu| - 1 | over band 0 = " + f"{worst_mu:.3e}",
        ))

    if band0 and band1:
        gaps = []
        for r1 in band1:
            gaps.append(min(abs(r1.xi - r0.xi / lam) / abs(r0.xi / lam) for r0 in band0))
        worst_ratio = max(gaps)
        checks.append(_check(
            "band1_ratio",
            worst_ratio <= tolerances.band_ratio,
            tolerances.band_ratio - worst_ratio,
            f"band-1 positions vs band-0 / lam, worst relative gap {worst_ratio:.3e}",
        ))
    else:
        checks.append(_check("band1_ratio", False, None, "band 1 not resolved"))

    radius = max((r.modulus for r in report.resonances), default=0.0)
    checks.append(_check(
        "spectral_radius",
        radius <= 1.0 + tolerances.radius_slack,
        1.0 + tolerances.radius_slack - radius,
        f"largest |xi| = {radius:.10f}",
    ))

    if alt_report is not None:
        alt0 = assign_bands(alt_report, lam, tolerances).in_band(0)
        if band0 and alt0:
            gap = max(min(abs(r.xi - a.xi) for a in alt0) for r in band0)
            checks.append(_check(
                "pair_agreement",
                gap <= tolerances.pair_agreement,
                tolerances.pair_agreement - gap,
                f"band-0 positions across observable pairs differ by {gap:.3e}",
            ))
        else:
            checks.append(_check("pair_agreement", False, None, "band 0 missing in one observable pair"))

    unassigned = [r for r in report.resonances if r.band is None and r.modulus > band_modulus(lam, 2)]
    checks.append(CheckResult(
        name="unassigned",
        status=CheckStatus.INFO,
        detail=f"{len(unassigned)} resonances above the band-2 circle without a band label",
    ))
    passed = all(c.status != CheckStatus.FAIL for c in checks)
    return BandVerdict(regime="sector", passed=passed, checks=checks)


def toral_analysis(report: Optional[ResonanceReport], tolerances: ToleranceConfig) -> BandVerdict:
    """N = 0: a toral automorphism mixes, so only the constant survives as xi = 1."""
    if report is None:
        check = CheckResult(
            name="toral_spectrum",
            status=CheckStatus.PASS,
            margin=None,
            detail="series vanishes identically; no resonance above the floor",
        )
        return BandVerdict(regime="toral", passed=True, checks=[check])
    visible = [r for r in report.resonances if r.modulus > tolerances.toral_floor]
    checks = []
    if visible:
        gap = max(abs(r.xi - 1.0) for r in visible)
        checks.append(_check(
            "toral_spectrum",
            len(visible) == 1 and gap <= tolerances.toral_unit,
            tolerances.toral_unit - gap,
            f"{len(visible)} resonances above {tolerances.toral_floor}; max |xi - 1| = {gap:.3e}",
        ))
    else:
        checks.append(_check(
            "toral_spectrum", True, None, f"no resonance above {tolerances.toral_floor} (mean-zero observables)"
        ))
    return BandVerdict(regime="toral", passed=all(c.status != CheckStatus.FAIL for c in checks), checks=checks)


def toral_decay_check(series: SeriesLike, threshold: float = 1e-10, from_n: int = 4) -> CheckResult:
    """Mean-zero torus observables decorrelate: |C_n| tiny for n >= from_n."""
    values = _values(series)[from_n:]
    worst = float(np.max(np.abs(values))) if len(values) else 0.0
    return _check(
        "toral_decay",
        worst <= threshold,
        threshold - worst,
        f"max |C_n| for n >= {from_n} is {worst:.3e}",
    )


def _envelope(window: np.ndarray, remainder: np.ndarray) -> np.ndarray:
    """Interior local maxima of the remainder when it oscillates, else the whole window.

    A leftover conjugate pair beats as |c e^{in theta} + c' e^{-in theta}|; its
    peaks carry the decay rate, its troughs do not.
    """
    r = remainder[window]
    peaks = [i for i in range(1, len(r) - 1) if r[i] > r[i - 1] and r[i] >= r[i + 1]]
    if len(peaks) < MIN_PEAKS:
        return window
    return window[peaks]


def residual_decay(
    series: SeriesLike,
    report: ResonanceReport,
    bands_removed: int,
    lam: Optional[float] = None,
    tolerances: Optional[ToleranceConfig] = None,
) -> DecayEstimate:
    """
    Slope of log|C_n - fitted bands < bands_removed| against n.

    Args:
        series: The series the report was fitted on
        report: Fitted resonances; bands are (re)assigned when lam is given
        bands_removed: Bands subtracted before measuring, at least one
        lam: Unstable eigenvalue; without it no expected slope is reported
        tolerances: decay_rel and the band tolerances

    Returns:
        DecayEstimate with the fitted window, the two-sided rate_matched and
        the one-sided within_bound
    """
    if bands_removed < 1:
        raise ValueError(f"bands_removed must be >= 1, got {bands_removed}")
    tolerances = tolerances or ToleranceConfig()
    values = _values(series)
    n = np.arange(len(values))
    if lam is not None:
        report = assign_bands(report, lam, tolerances)
    removed = [r for r in report.resonances if r.band is not None and r.band < bands_removed]
    model = np.zeros_like(values)
    for r in removed:
        model = model + r.amplitude * np.power(r.xi, n)
    remainder = np.abs(values - model)

    floor = NOISE_FLOOR * max(float(np.max(np.abs(values))), 1e-300)
    usable = np.nonzero(remainder > floor)[0]
    usable = usable[usable >= report.start]
    if len(usable) < 2:
        return DecayEstimate(
            bands_removed=bands_removed,
            slope=-math.inf,
            expected_slope=None if lam is None else -(bands_removed + 0.5) * math.log(lam),
            window_start=int(report.start),
            window_end=int(report.start),
            max_remainder=float(np.max(remainder)),
            rate_matched=None if lam is None else True,
            within_bound=True,
        )
    # the contiguous run from the first usable index, so noise does not bend the fit
    end = usable[0]
    while end + 1 < len(remainder) and remainder[end + 1] > floor:
        end += 1
    window = np.arange(usable[0], end + 1)
    if len(window) < 2:
        window = usable
    fit_points = _envelope(window, remainder)
    slope = float(np.polyfit(fit_points, np.log(remainder[fit_points]), 1)[0])

    expected = relative = within = matched = None
    if lam is not None:
        expected = -(bands_removed + 0.5) * math.log(lam)
        relative = abs(slope - expected) / abs(expected)
        within = slope <= expected + tolerances.decay_rel * abs(expected)
        matched = relative <= tolerances.decay_rel
    logger.debug(f"Residual decay after {bands_removed} band(s): slope {slope:.6f}, expected {expected}")
    return DecayEstimate(
        bands_removed=bands_removed,
        slope=slope,
        expected_slope=expected,
        relative_error=relative,
        rate_matched=matched,
        window_start=int(window[0]),
        window_end=int(window[-1]),
        max_remainder=float(np.max(remainder)),
        within_bound=within,
    )


def decay_check(estimate: DecayEstimate, tolerances: Optional[ToleranceConfig] = None) -> CheckResult:
    """Two-sided verdict on a residual decay estimate.

    The measured rate must match the predicted one; decaying faster than the
    next band fails as well. `within_bound` stays on the estimate as the
    one-sided reading.
    """
    tolerances = tolerances or ToleranceConfig()
    name = "residual_decay" if estimate.bands_removed == 1 else f"residual_decay/{estimate.bands_removed}"
    if estimate.expected_slope is None:
        return CheckResult(name=name, status=CheckStatus.INFO, detail=f"slope {estimate.slope:.6f}, no lam to compare")
    if math.isinf(estimate.slope):
        return _check(name, bool(estimate.rate_matched), None, "remainder below the noise floor after band removal")
    return _check(
        name,
        bool(estimate.rate_matched),
        tolerances.decay_rel - estimate.relative_error,
        f"slope {estimate.slope:.6f} against {estimate.expected_slope:.6f} "
        f"(relative error {estimate.relative_error:.3e}, one-sided bound {'met' if estimate.within_bound else 'missed'})",
    )
