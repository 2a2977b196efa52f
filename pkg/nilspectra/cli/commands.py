"""Subcommand handlers. Each returns a process exit code: 0 pass, 1 fail, 2 input error."""

from fractions import Fraction
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from nilspectra.exceptions import NilSpectraError
from nilspectra.models import (
    CheckResult,
    CheckStatus,
    ExperimentConfig,
    LatticeConfig,
    NormsReport,
    Semantics,
)
from nilspectra.services.anisotropic import (
    check_change_of_variables,
    inequality_experiments,
    invariant_theta_rows,
    slide_table,
    window_split,
)
from nilspectra.services.automorphism import build, check_lattice_compatibility, check_renormalization
from nilspectra.services.heisenberg import GroupElement, LatticeElement, inverse, mul, reduce
from nilspectra.services.norms import mollifier_margins, template_family
from nilspectra.services.pipeline_workflow import (
    analyze,
    build_system,
    compute_series,
    exit_code_for,
    fit_series,
    run_pipeline,
    write_analysis,
)
from nilspectra.services.storage_service import ArtifactStore
from nilspectra.utils.logger import get_logger

logger = get_logger()

SLIDE_RATIO = (1.5, 2.5)
CHANGE_OF_VARIABLES_TOL = 1e-8
WINDOW_TOL = 1e-10


def _check(name: str, ok: bool, margin: Optional[float], detail: str) -> CheckResult:
    return CheckResult(name=name, status=CheckStatus.PASS if ok else CheckStatus.FAIL, margin=margin, detail=detail)


def print_checks(title: str, checks: List[CheckResult]) -> None:
    """Structured summary on stdout."""
    print(title)
    for c in checks:
        margin = "" if c.margin is None else f" (margin {c.margin:.3e})"
        print(f"  [{c.status.value:>7}] {c.name}{margin}: {c.detail}")


def _guarded(stage: str, fn: Callable[[], int]) -> int:
    try:
        return fn()
    except (NilSpectraError, ValueError, TypeError) as e:
        logger.error(f"{stage} failed: {e}")
        print(f"error: {e}")
        return exit_code_for(e)


# ---------------------------------------------------------------- verify / stages


def cmd_verify(config: ExperimentConfig, out_dir: Path) -> int:
    """Full pipeline: build, correlate, fit, analyze, persist."""
    outcome = run_pipeline(config, out_dir)
    if outcome.error:
        print(f"error: {outcome.error}")
    print_checks(f"verify {config.name}: {'pass' if outcome.exit_code == 0 else 'fail'}", outcome.checks)
    for name, path in sorted(outcome.artifacts.items()):
        print(f"  {name}: {path}")
    return outcome.exit_code


def cmd_correlate(config: ExperimentConfig, out_dir: Path) -> int:
    def run() -> int:
        auto, observables = build_system(config)
        store = ArtifactStore(out_dir)
        series = compute_series(config, auto, observables)
        written = store.write_correlations(series)
        if "g_alt" in observables:
            written += store.write_correlations(
                compute_series(config, auto, observables, alt=True), stem="correlations_alt"
            )
        for path in written:
            print(f"  {path}")
        return 0

    return _guarded("correlate", run)


def config_for_series(config: Optional[ExperimentConfig], metadata) -> ExperimentConfig:
    """The stored system overrides whatever the experiment file says about it."""
    system = {
        "automorphism": metadata.automorphism,
        "lattice": LatticeConfig(K=metadata.K, N=metadata.N),
        "g": metadata.g,
        "h": metadata.h,
    }
    if config is None:
        return ExperimentConfig(**system)
    return config.model_copy(update=system)


def cmd_resonances(config: Optional[ExperimentConfig], out_dir: Path, series_path: Optional[Path] = None) -> int:
    """Fit and analyze a stored correlations.csv (and correlations_alt.csv when present)."""
    def run() -> int:
        store = ArtifactStore(out_dir)
        series = store.read_correlations(series_path)
        alt_path = store.path(ArtifactStore.ALT_CORRELATIONS) if series_path is None \
            else Path(series_path).with_name(ArtifactStore.ALT_CORRELATIONS)
        alt_series = store.read_correlations(alt_path) if alt_path.exists() else None

        effective = config_for_series(config, series.metadata)
        spec = effective.automorphism
        auto = build(spec.a, spec.b, spec.c, spec.d, spec.ell, spec.m, effective.lattice.K)
        report = fit_series(effective, series)
        alt_report = fit_series(effective, alt_series) if alt_series is not None else None
        report, verdict, decay = analyze(effective, auto, series, report, alt_report)
        write_analysis(store, effective, report, verdict, decay)
        print_checks(f"resonances: {'pass' if verdict.passed else 'fail'}", verdict.checks)
        return 0 if verdict.passed else 1

    return _guarded("resonances", run)


# ---------------------------------------------------------------- norms


def run_norms(config: ExperimentConfig, threads: int = 1) -> NormsReport:
    """The norms laboratory on the configured h."""
    auto, observables = build_system(config)
    h = observables["h"]
    norms = config.norms
    frame = auto.frame
    L = config.lattice.N * config.lattice.K

    margins = mollifier_margins(norms.delta, norms.q_max, norms.epsilons, min(norms.modulations, 4))
    inequalities = inequality_experiments(auto, h, norms, config.lattice.N, threads)
    slide = slide_table(h, frame, L, norms, seed=config.seed)
    windows = window_split(
        h, frame, GroupElement(0.31, 0.47, 0.13 / auto.K), norms.delta,
        lengths=tuple(f * norms.delta for f in (4, 8, 16)), q=norms.q,
    )

    checks = [
        _check(
            "mollifier_bounds",
            all(row.passed for row in margins),
            min(min(r.approximation_margin, r.cq_margin, r.cq1_margin) for r in margins),
            f"{sum(r.passed for r in margins)}/{len(margins)} (q, eps) rows with nonnegative margins",
        )
    ]
    exact = [e for e in inequalities.entries if e.semantics == Semantics.EXACT_DICTIONARY]
    checks.append(_check(
        "v_continuity", all(e.verdict == CheckStatus.PASS for e in exact), None,
        "dictionary estimate of Vh never exceeds that of h",
    ))
    contraction = [e for e in inequalities.entries if e.name.startswith("contraction/j=1,")]
    checks.append(_check(
        "contraction_trend", all(e.verdict == CheckStatus.PASS for e in contraction),
        None if not contraction else min(e.rhs - e.lhs for e in contraction),
        f"lam^k est_1(L^k h) bounded for k <= {norms.k_max}",
    ))
    if L != 0 and len(slide) > 1:
        ratios = [a.defect / b.defect for a, b in zip(slide, slide[1:]) if b.defect > 0]
        ok = bool(ratios) and all(SLIDE_RATIO[0] <= r <= SLIDE_RATIO[1] for r in ratios)
        checks.append(_check(
            "slide_first_order", ok, None,
            "defect ratios under eps-halving: " + ", ".join(f"{r:.3f}" for r in ratios),
        ))
    worst_split = max(row.split_error / max(1.0, row.direct) for row in windows)
    checks.append(_check(
        "window_split", worst_split <= WINDOW_TOL, WINDOW_TOL - worst_split,
        f"windowed sums reproduce the direct integral to {worst_split:.2e}",
    ))
    growth = [row.abs_sum / row.length for row in windows]
    checks.append(CheckResult(
        name="window_growth", status=CheckStatus.INFO,
        detail="sum |pieces| / length: " + ", ".join(f"{g:.3e}" for g in growth),
    ))
    eta = template_family(norms.delta, 2, norms.q)[1]
    for k in (1, 2):
        _, _, gap = check_change_of_variables(auto, h, eta, GroupElement(0.2, 0.6, 0.05 / auto.K), k)
        checks.append(_check(
            f"change_of_variables/k={k}", gap <= CHANGE_OF_VARIABLES_TOL, CHANGE_OF_VARIABLES_TOL - gap,
            f"transfer functional against rescaled functional at Phi^{k}(m): {gap:.2e}",
        ))
    invariant = invariant_theta_rows(auto, config.lattice.N, norms, threads=threads)
    if invariant:
        largest = max(row.radius for row in invariant)
        tail = [row for row in invariant if row.radius == largest]
        checks.append(CheckResult(
            name="invariant_distributions", status=CheckStatus.INFO,
            detail=f"R = {largest:g}: " + ", ".join(
                f"r={row.component} est_0 {row.per_j[0]:.3e} est_V {max(row.per_j[1:], default=0.0):.3e}" for row in tail
            ),
        ))
    return NormsReport(
        mollifier=margins, inequalities=inequalities, slide=slide, windows=windows, invariant=invariant, checks=checks,
    )


def cmd_norms(config: ExperimentConfig, out_dir: Path) -> int:
    def run() -> int:
        report = run_norms(config, config.numerics.threads)
        ArtifactStore(out_dir).write_norms(report)
        passed = all(c.status != CheckStatus.FAIL for c in report.checks)
        print_checks(f"norms {config.name}: {'pass' if passed else 'fail'}", report.checks)
        return 0 if passed else 1

    return _guarded("norms", run)


# ---------------------------------------------------------------- selftest


def _random_rational(rng: np.random.Generator) -> Fraction:
    return Fraction(int(rng.integers(-50, 51)), int(rng.integers(1, 13)))


def algebra_suite(rng: np.random.Generator, samples: int = 1000, K: int = 2) -> List[CheckResult]:
    """Group laws and reduction on random rational triples."""
    def element() -> GroupElement:
        return GroupElement(*(_random_rational(rng) for _ in range(3)))

    assoc = inv = idem = 0
    for _ in range(samples):
        a, b, c = element(), element(), element()
        assoc += mul(mul(a, b), c) != mul(a, mul(b, c))
        inv += mul(a, inverse(a)) != GroupElement(0, 0, 0)
        once = reduce(a, K).point
        idem += reduce(once, K).point != once
    gamma = LatticeElement(int(rng.integers(-5, 6)), int(rng.integers(-5, 6)), int(rng.integers(-5, 6)))
    delta = LatticeElement(int(rng.integers(-5, 6)), int(rng.integers(-5, 6)), int(rng.integers(-5, 6)))
    product = mul(gamma.to_group(K), delta.to_group(K))
    closure = product == gamma.mul(delta, K).to_group(K)
    return [
        _check("associativity", assoc == 0, None, f"{assoc} failures in {samples}"),
        _check("inverse", inv == 0, None, f"{inv} failures in {samples}"),
        _check("reduce_idempotent", idem == 0, None, f"{idem} failures in {samples}"),
        _check("lattice_closure", closure, None, "integer-form product matches the group product"),
    ]


def automorphism_suite(rng: np.random.Generator, samples: int = 200) -> List[CheckResult]:
    auto = build(2, 1, 1, 1, 0, 0, K=1)
    frame = auto.frame
    u_res, s_res = frame.eigen_residuals(auto.matrix)
    bracket = frame.V.bracket(frame.W).vz
    cocycle_fail = 0
    for n in range(1, 9):
        m = GroupElement(*(_random_rational(rng) for _ in range(3)))
        direct = m
        for _ in range(n):
            direct = auto.apply(direct)
        cocycle_fail += auto.iterate_cocycle(n).apply(m) != direct
    renorm = max(
        check_renormalization(auto, frame, GroupElement(*map(float, rng.random(3))), float(rng.uniform(-0.5, 0.5)))
        for _ in range(samples)
    )
    return [
        _check("lattice_compatible", check_lattice_compatibility(auto), None, "generators map into the lattice"),
        _check("frame_eigen", max(u_res, s_res) <= 1e-12, 1e-12 - max(u_res, s_res),
               f"eigen residuals {u_res:.1e}, {s_res:.1e}"),
        _check("frame_bracket", abs(bracket - 1.0) <= 1e-12, None, f"[V, W] = {bracket:.15f} Z"),
        _check("cocycle", cocycle_fail == 0, None, "tau_n matches n-fold apply for n <= 8"),
        _check("renormalization", renorm <= 1e-10, 1e-10 - renorm, f"max flow-conjugacy defect {renorm:.1e}"),
    ]


def golden_suite(out_dir: Path) -> List[CheckResult]:
    """Short golden pipeline at n_max = 10."""
    config = ExperimentConfig.model_validate({
        "name": "selftest-golden",
        "automorphism": {"a": 2, "b": 1, "c": 1, "d": 1},
        "lattice": {"K": 1, "N": 1},
        "g": {"terms": [{"re": 1.0, "m": 0, "l": 0}, {"re": 0.5, "m": 1, "l": 0}]},
        "h": {"terms": [{"re": 1.0, "m": 0, "l": 0}, {"re": 0.5, "m": 1, "l": 0}]},
        "numerics": {"n_max": 10},
    })
    outcome = run_pipeline(config, out_dir)
    wanted = {"band0_modulus", "band0_count", "unit_mu", "spectral_radius"}
    picked = [c for c in outcome.checks if c.name in wanted]
    if not picked:
        return [_check("golden_pipeline", False, None, outcome.error or "no checks produced")]
    return picked


def cmd_selftest(out_dir: Path, seed: int = 0) -> int:
    rng = np.random.default_rng(seed)
    checks = algebra_suite(rng) + automorphism_suite(rng) + golden_suite(Path(out_dir) / "selftest")
    passed = all(c.status != CheckStatus.FAIL for c in checks)
    print_checks(f"selftest: {'pass' if passed else 'fail'}", checks)
    return 0 if passed else 1
