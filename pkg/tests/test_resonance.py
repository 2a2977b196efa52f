"""Matrix-pencil fitting and band-structure verdicts on synthetic series."""

import cmath
import math

import numpy as np
import pytest

from nilspectra.exceptions import IllConditioned, TooShort
from nilspectra.models import CheckStatus, ToleranceConfig
from nilspectra.services.resonance import (
    assign_bands,
    band_analysis,
    decay_check,
    pencil_fit,
    residual_decay,
    toral_analysis,
    toral_decay_check,
)

n = np.arange(20)


def _status(verdict, name):
    return next(c.status for c in verdict.checks if c.name == name)


def test_recovers_two_exponentials():
    xi1 = 0.5 * cmath.exp(1j * math.pi / 3)
    series = xi1 ** n + 0.1 * 0.25 ** n
    report = pencil_fit(series)
    assert report.rank == 2
    assert report.resonances[0].xi == pytest.approx(xi1, abs=1e-10)
    assert report.resonances[1].xi == pytest.approx(0.25, abs=1e-10)
    assert report.resonances[0].amplitude == pytest.approx(1.0, abs=1e-9)
    assert report.resonances[1].amplitude == pytest.approx(0.1, abs=1e-9)
    assert max(report.residuals) <= 1e-10


def test_single_mode():
    report = pencil_fit(0.7 ** n)
    assert report.rank == 1
    assert report.resonances[0].modulus == pytest.approx(0.7, abs=1e-12)
    assert report.resonances[0].amplitude == pytest.approx(1.0, abs=1e-12)


def test_fit_start_skips_leading_samples():
    series = 0.5 ** n.astype(complex)
    series[0] = 5.0
    report = pencil_fit(series, start=1)
    assert report.start == 1
    assert report.resonances[0].xi == pytest.approx(0.5, abs=1e-10)
    assert report.resonances[0].amplitude == pytest.approx(1.0, abs=1e-9)


def test_fixed_order():
    series = 0.9 ** n + 1e-3 * 0.3 ** n
    assert pencil_fit(series, order=1).rank == 1


def test_too_short():
    with pytest.raises(TooShort):
        pencil_fit([1.0, 0.5, 0.25, 0.125, 0.0625])
    with pytest.raises(TooShort):
        pencil_fit(0.5 ** n, start=16)


def test_identically_zero():
    with pytest.raises(IllConditioned):
        pencil_fit(np.zeros(12))


def test_rank_tolerance_range():
    with pytest.raises(ValueError):
        pencil_fit(0.5 ** n, rank_tol=0.0)


def test_assign_bands(golden_lam):
    theta = 0.7
    series = (golden_lam ** -0.5 * cmath.exp(1j * theta)) ** n + 0.3 * (golden_lam ** -1.5 * cmath.exp(1j * theta)) ** n
    report = assign_bands(pencil_fit(series), golden_lam, ToleranceConfig())
    assert [r.band for r in report.resonances] == [0, 1]
    assert report.resonances[0].mu == pytest.approx(cmath.exp(1j * theta), abs=1e-8)
    assert report.lam == golden_lam


def test_band_analysis_passes_on_clean_bands(golden_lam):
    theta = 0.7
    series = (golden_lam ** -0.5 * cmath.exp(1j * theta)) ** n + 0.3 * (golden_lam ** -1.5 * cmath.exp(1j * theta)) ** n
    verdict = band_analysis(pencil_fit(series), golden_lam, N=1, K=1)
    assert verdict.passed
    for name in ("band0_modulus", "band0_count", "unit_mu", "band1_ratio", "spectral_radius"):
        assert _status(verdict, name) == CheckStatus.PASS
    assert _status(verdict, "unassigned") == CheckStatus.INFO


def test_band_count_is_bounded_by_sector_size(golden_lam):
    # a real series carries a conjugate pair on the band-0 circle
    xi = golden_lam ** -0.5 * cmath.exp(0.9j)
    series = (xi ** n + np.conj(xi) ** n).real.astype(complex)
    report = pencil_fit(series)
    assert _status(band_analysis(report, golden_lam, N=1, K=1), "band0_count") == CheckStatus.FAIL
    assert _status(band_analysis(report, golden_lam, N=2, K=1), "band0_count") == CheckStatus.PASS


def test_band_analysis_fails_off_circle(golden_lam):
    verdict = band_analysis(pencil_fit(0.7 ** n), golden_lam, N=1, K=1)
    assert not verdict.passed
    assert _status(verdict, "band0_modulus") == CheckStatus.FAIL


def test_pair_agreement(golden_lam):
    xi = golden_lam ** -0.5 * cmath.exp(0.4j)
    report = pencil_fit(xi ** n)
    alt = pencil_fit(2.0 * xi ** n)
    verdict = band_analysis(report, golden_lam, N=1, K=1, alt_report=alt)
    assert _status(verdict, "pair_agreement") == CheckStatus.PASS
    moved = pencil_fit((golden_lam ** -0.5 * cmath.exp(0.5j)) ** n)
    verdict = band_analysis(report, golden_lam, N=1, K=1, alt_report=moved)
    assert _status(verdict, "pair_agreement") == CheckStatus.FAIL


def test_toral_verdicts():
    tolerances = ToleranceConfig()
    assert toral_analysis(None, tolerances).passed
    constant = np.concatenate([[1.0], 0.5 * np.ones(19)])
    verdict = band_analysis(pencil_fit(constant), 2.6, N=0, K=1)
    assert verdict.regime == "toral"
    assert verdict.passed
    assert not band_analysis(pencil_fit(0.9 ** n), 2.6, N=0, K=1).passed


def test_toral_decay_check():
    series = np.concatenate([[1.0, 0.1, 0.01, 0.001], np.zeros(8)])
    assert toral_decay_check(series).status == CheckStatus.PASS
    series[6] = 1e-6
    assert toral_decay_check(series).status == CheckStatus.FAIL


def test_residual_decay_after_band_zero(golden_lam):
    values = golden_lam ** (-0.5 * n) + 0.5 * golden_lam ** (-1.5 * n)
    report = pencil_fit(values)
    decay = residual_decay(values, report, 1, lam=golden_lam)
    assert decay.expected_slope == pytest.approx(-1.5 * math.log(golden_lam))
    assert decay.relative_error < 1e-2
    assert decay.within_bound
    assert decay.window_start == 0
    assert decay.rate_matched
    assert decay_check(decay).status == CheckStatus.PASS


def test_residual_decay_without_lam_still_reports_slope():
    values = 0.8 ** n
    decay = residual_decay(values, pencil_fit(values), 1)
    assert decay.expected_slope is None
    assert decay.within_bound is None


def test_residual_decay_rejects_zero_bands():
    with pytest.raises(ValueError):
        residual_decay(0.5 ** n, pencil_fit(0.5 ** n), 0)


def test_residual_decay_fails_when_remainder_decays_too_fast(golden_lam):
    values = golden_lam ** (-0.5 * n) + 0.3 * golden_lam ** (-3.0 * n)
    decay = residual_decay(values, pencil_fit(values), 1, lam=golden_lam)
    assert decay.slope == pytest.approx(-3.0 * math.log(golden_lam), rel=1e-3)
    assert decay.relative_error == pytest.approx(1.0, abs=1e-2)
    assert decay.within_bound
    assert not decay.rate_matched
    check = decay_check(decay)
    assert check.name == "residual_decay"
    assert check.status == CheckStatus.FAIL
    assert check.margin < 0


def test_residual_decay_follows_peaks_of_beating_pair():
    lam = 1.2
    band1 = lam ** -1.5 * cmath.exp(1j * math.pi / 3)
    values = lam ** (-0.5 * n) + band1 ** n + 0.9 * band1.conjugate() ** n
    decay = residual_decay(values, pencil_fit(values), 1, lam=lam)
    assert decay.relative_error < 1e-6
    assert decay_check(decay).status == CheckStatus.PASS


def test_decay_check_without_lam_is_informational():
    values = 0.8 ** n
    assert decay_check(residual_decay(values, pencil_fit(values), 1)).status == CheckStatus.INFO
