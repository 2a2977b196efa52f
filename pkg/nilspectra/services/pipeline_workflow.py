"""Verification pipeline using LangGraph: build -> correlate -> fit -> analyze -> persist."""

from pathlib import Path
from typing import Dict, List, Optional, Tuple, TypedDict

from langgraph.graph import END, StateGraph

from nilspectra.exceptions import (
    ArtifactError,
    ConfigError,
    DeterminantError,
    IllConditioned,
    InvalidTruncation,
    NotHyperbolicError,
    OrientationError,
    SectorMismatch,
)
from nilspectra.models import (
    BandVerdict,
    CheckResult,
    CheckStatus,
    CorrelationSeries,
    DecayEstimate,
    ExperimentConfig,
    ObservableSpec,
    PipelineOutcome,
    ResonanceReport,
)
from nilspectra.services.automorphism import PartialHypAuto, build
from nilspectra.services.resonance import (
    assign_bands,
    band_analysis,
    decay_check,
    pencil_fit,
    residual_decay,
    toral_decay_check,
)
from nilspectra.services.sector import SectorFunction, from_observable
from nilspectra.services.storage_service import ArtifactStore
from nilspectra.services.transfer import correlate
from nilspectra.utils.logger import get_logger

logger = get_logger()

# errors a user fixes by editing the experiment file
INPUT_ERRORS = (
    ConfigError,
    ArtifactError,
    DeterminantError,
    NotHyperbolicError,
    OrientationError,
    InvalidTruncation,
    SectorMismatch,
    ValueError,
    TypeError,
)


class PipelineState(TypedDict, total=False):
    """State for the verification workflow."""
    config: ExperimentConfig
    out_dir: str
    auto: PartialHypAuto
    observables: Dict[str, SectorFunction]
    series: CorrelationSeries
    alt_series: Optional[CorrelationSeries]
    report: Optional[ResonanceReport]
    alt_report: Optional[ResonanceReport]
    verdict: BandVerdict
    decay: List[DecayEstimate]
    checks: List[CheckResult]
    artifacts: Dict[str, str]
    error: str
    exit_code: int
    success: bool


# ---------------------------------------------------------------- stages


def build_system(config: ExperimentConfig) -> Tuple[PartialHypAuto, Dict[str, SectorFunction]]:
    """Automorphism plus normalized observables, keyed g, h and optionally g_alt, h_alt."""
    spec = config.automorphism
    auto = build(spec.a, spec.b, spec.c, spec.d, spec.ell, spec.m, config.lattice.K)
    N, K, n_trunc = config.lattice.N, config.lattice.K, config.numerics.n_trunc
    observables = {}
    for name in ("g", "h", "g_alt", "h_alt"):
        obs: Optional[ObservableSpec] = getattr(config, name)
        if obs is not None:
            observables[name] = from_observable(obs, N, K, n_trunc)
    if ("g_alt" in observables) != ("h_alt" in observables):
        raise ConfigError("g_alt and h_alt must be given together")
    return auto, observables


def compute_series(
    config: ExperimentConfig,
    auto: PartialHypAuto,
    observables: Dict[str, SectorFunction],
    alt: bool = False,
) -> CorrelationSeries:
    num = config.numerics
    g_name, h_name = ("g_alt", "h_alt") if alt else ("g", "h")
    return correlate(
        auto,
        observables[g_name],
        observables[h_name],
        n_max=num.n_max,
        M=num.grid,
        engine=num.engine,
        threads=num.threads,
        g_spec=getattr(config, g_name),
        h_spec=getattr(config, h_name),
    )


def fit_series(config: ExperimentConfig, series: CorrelationSeries) -> Optional[ResonanceReport]:
    """Pencil fit; a toral series that vanishes identically has no report."""
    try:
        return pencil_fit(series, rank_tol=config.numerics.rank_tol, start=config.numerics.fit_start)
    except IllConditioned:
        if config.lattice.N == 0:
            logger.info("Toral series vanishes identically")
            return None
        raise


def _has_constant(spec: ObservableSpec) -> bool:
    return any(t.m == 0 and t.l == 0 and t.coefficient != 0 for t in spec.terms)


def analyze(
    config: ExperimentConfig,
    auto: PartialHypAuto,
    series: CorrelationSeries,
    report: Optional[ResonanceReport],
    alt_report: Optional[ResonanceReport] = None,
) -> Tuple[Optional[ResonanceReport], BandVerdict, List[DecayEstimate]]:
    """Band verdict plus the decay and toral checks; returns the band-labelled report."""
    N, K, lam = config.lattice.N, config.lattice.K, auto.lam
    tol = config.tolerances
    verdict = band_analysis(report, lam, N, K, tol, alt_report) if report is not None \
        else band_analysis(None, lam, 0, K, tol)
    checks = list(verdict.checks)
    decay: List[DecayEstimate] = []

    if N == 0:
        if not (_has_constant(config.g) or _has_constant(config.h)):
            checks.append(toral_decay_check(series))
        labelled = report.model_copy(update={"lam": lam}) if report is not None else None
    else:
        labelled = assign_bands(report, lam, tol)
        estimate = residual_decay(series, labelled, 1, lam, tol)
        decay.append(estimate)
        checks.append(decay_check(estimate, tol))
    passed = all(c.status != CheckStatus.FAIL for c in checks)
    verdict = verdict.model_copy(update={"passed": passed, "checks": checks})
    if labelled is not None:
        labelled = labelled.model_copy(update={"verdict": verdict})
    return labelled, verdict, decay


def exit_code_for(error: BaseException) -> int:
    """2 for input and validation errors, 1 for numerical failures."""
    if isinstance(error, INPUT_ERRORS):
        return 2
    return 1


# ---------------------------------------------------------------- graph


class VerificationWorkflow:
    """
    LangGraph workflow for one verification run.

    Workflow steps:
    1. Build the automorphism and observables
    2. Correlate (and the alternative pair, if configured)
    3. Fit resonances
    4. Analyze the band structure
    5. Persist artifacts
    """

    def __init__(self, config: ExperimentConfig, out_dir: Path):
        self.config = config
        self.out_dir = Path(out_dir)
        self.graph = self._build_graph()

    def _build_graph(self):
        workflow = StateGraph(PipelineState)

        workflow.add_node("build", self._build)
        workflow.add_node("correlate", self._correlate)
        workflow.add_node("fit", self._fit)
        workflow.add_node("analyze", self._analyze)
        workflow.add_node("persist", self._persist)
        workflow.add_node("handle_error", self._handle_error)

        workflow.set_entry_point("build")

        for node, following in (("build", "correlate"), ("correlate", "fit"), ("fit", "analyze"),
                                ("analyze", "persist")):
            workflow.add_conditional_edges(
                node,
                self._check_success,
                {
                    "success": following,
                    "error": "handle_error",
                }
            )

        workflow.add_edge("persist", END)
        workflow.add_edge("handle_error", END)

        return workflow.compile()

    def _fail(self, state: PipelineState, stage: str, error: Exception) -> PipelineState:
        logger.error(f"{stage} failed: {error}")
        state["error"] = f"{stage} failed: {type(error).__name__}: {error}"
        state["exit_code"] = exit_code_for(error)
        state["success"] = False
        return state

    def _build(self, state: PipelineState) -> PipelineState:
        try:
            logger.info(f"Building system for '{self.config.name}'")
            auto, observables = build_system(self.config)
            state["auto"] = auto
            state["observables"] = observables
            state["success"] = True
        except Exception as e:
            return self._fail(state, "build", e)
        return state

    def _correlate(self, state: PipelineState) -> PipelineState:
        try:
            state["series"] = compute_series(self.config, state["auto"], state["observables"])
            state["alt_series"] = None
            if "g_alt" in state["observables"]:
                state["alt_series"] = compute_series(self.config, state["auto"], state["observables"], alt=True)
            state["success"] = True
        except Exception as e:
            return self._fail(state, "correlate", e)
        return state

    def _fit(self, state: PipelineState) -> PipelineState:
        try:
            state["report"] = fit_series(self.config, state["series"])
            state["alt_report"] = None
            if state.get("alt_series") is not None:
                state["alt_report"] = fit_series(self.config, state["alt_series"])
            state["success"] = True
        except Exception as e:
            return self._fail(state, "fit", e)
        return state

    def _analyze(self, state: PipelineState) -> PipelineState:
        try:
            report, verdict, decay = analyze(
                self.config, state["auto"], state["series"], state["report"], state.get("alt_report")
            )
            state["report"] = report
            state["verdict"] = verdict
            state["decay"] = decay
            state["checks"] = verdict.checks
            state["success"] = True
            logger.info(f"Band analysis ({verdict.regime}): {'pass' if verdict.passed else 'fail'}")
        except Exception as e:
            return self._fail(state, "analyze", e)
        return state

    def _persist(self, state: PipelineState) -> PipelineState:
        try:
            store = ArtifactStore(self.out_dir)
            written = persist_results(store, self.config, state)
            state["artifacts"] = written
            state["exit_code"] = 0 if state["verdict"].passed else 1
            state["success"] = True
        except Exception as e:
            return self._fail(state, "persist", e)
        return state

    def _handle_error(self, state: PipelineState) -> PipelineState:
        logger.error(f"Pipeline error: {state.get('error', 'Unknown error')}")
        try:
            store = ArtifactStore(self.out_dir)
            path = store.write_report(f"Verification: {self.config.name}", state.get("checks", []),
                                      error=state.get("error"))
            state["artifacts"] = {"report": path}
        except Exception as e:
            logger.warning(f"Could not write error report: {e}")
        return state

    def _check_success(self, state: PipelineState) -> str:
        return "success" if state.get("success") else "error"

    def run(self) -> PipelineOutcome:
        state = self.graph.invoke({"config": self.config, "out_dir": str(self.out_dir), "checks": []})
        return PipelineOutcome(
            success=bool(state.get("success")) and state.get("exit_code", 1) == 0,
            exit_code=state.get("exit_code", 1),
            checks=state.get("checks", []),
            error=state.get("error"),
            artifacts=state.get("artifacts", {}),
        )


def write_analysis(
    store: ArtifactStore,
    config: ExperimentConfig,
    report: Optional[ResonanceReport],
    verdict: BandVerdict,
    decay: List[DecayEstimate],
) -> Dict[str, str]:
    """resonances.json and report.md; shared by verify and the stage-wise resonances command."""
    written: Dict[str, str] = {}
    if report is not None:
        written["resonances"] = store.write_resonances(report, decay)
    written["report"] = store.write_report(f"Verification: {config.name}", verdict.checks, report, verdict)
    return written


def persist_results(store: ArtifactStore, config: ExperimentConfig, state: PipelineState) -> Dict[str, str]:
    """Write the correlation, resonance and report artifacts of a finished analysis."""
    written: Dict[str, str] = {}
    written["correlations"], written["correlations_meta"] = store.write_correlations(state["series"])
    if state.get("alt_series") is not None:
        written["correlations_alt"], written["correlations_alt_meta"] = store.write_correlations(
            state["alt_series"], stem="correlations_alt"
        )
    written.update(write_analysis(store, config, state.get("report"), state["verdict"], state.get("decay", [])))
    return written


def run_pipeline(config: ExperimentConfig, out_dir: Path) -> PipelineOutcome:
    """
    Run build, correlate, fit, analyze and persist for one experiment.

    Args:
        config: Parsed experiment
        out_dir: Run directory for the artifacts

    Returns:
        PipelineOutcome with exit code 0 (pass), 1 (a check failed) or 2 (input error)
    """
    return VerificationWorkflow(config, out_dir).run()
