"""Pydantic models for experiment configuration and result artifacts."""

from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator


class EngineKind(str, Enum):
    """Correlation engines."""
    AUTO = "auto"
    PACKETS = "packets"
    TRAPEZOID = "trapezoid"
    MODES = "modes"


class CheckStatus(str, Enum):
    """Outcome of a single verification check."""
    PASS = "pass"
    FAIL = "fail"
    INFO = "info"


class Semantics(str, Enum):
    """How far an inequality check can be trusted."""
    EXACT_DICTIONARY = "exact-dictionary"
    HEURISTIC = "heuristic"


# ---------------------------------------------------------------- config


class AutomorphismSpec(BaseModel):
    """Integer data of the automorphism."""
    a: int
    b: int
    c: int
    d: int
    ell: int = 0
    m: int = 0


class ObservableTerm(BaseModel):
    """One theta-Hermite term; for N = 0 (m, l) are the torus frequencies."""
    re: float
    im: float = 0.0
    m: int
    l: int  # noqa: E741

    @property
    def coefficient(self) -> complex:
        return complex(self.re, self.im)


class ObservableSpec(BaseModel):
    """A sector function as a list of terms."""
    terms: List[ObservableTerm] = Field(min_length=1)


class LatticeConfig(BaseModel):
    K: int = Field(default=1, ge=1, description="Lattice index")
    N: int = Field(default=1, description="Sector index")


class NumericsConfig(BaseModel):
    grid: int = Field(default=256, description="Trapezoid grid size M")
    n_max: int = Field(default=12, ge=5, le=40, description="Last correlation index")
    engine: EngineKind = Field(default=EngineKind.AUTO)
    n_trunc: int = Field(default=8, description="Lattice-sum truncation radius")
    rank_tol: float = Field(default=1e-10, gt=0.0, lt=1.0)
    fit_start: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)

    @field_validator("grid")
    @classmethod
    def _grid_power_of_two(cls, value: int) -> int:
        if value < 64 or value & (value - 1):
            raise ValueError(f"grid must be a power of two >= 64, got {value}")
        return value


class ToleranceConfig(BaseModel):
    band0: float = Field(default=1e-3, gt=0.0, description="Relative band-0 tolerance")
    band1: float = Field(default=1e-2, gt=0.0, description="Relative band-1 tolerance")
    deeper: float = Field(default=5e-2, gt=0.0, description="Relative tolerance for bands >= 2")
    modulus_abs: float = Field(default=1e-4, gt=0.0)
    unit_mu: float = Field(default=1e-4, gt=0.0)
    band_ratio: float = Field(default=1e-2, gt=0.0)
    decay_rel: float = Field(default=0.1, gt=0.0)
    radius_slack: float = Field(default=1e-6, ge=0.0)
    pair_agreement: float = Field(default=1e-6, gt=0.0)
    toral_floor: float = Field(default=0.05, gt=0.0)
    toral_unit: float = Field(default=1e-8, gt=0.0)

    def for_band(self, band: int) -> float:
        if band == 0:
            return self.band0
        if band == 1:
            return self.band1
        return self.deeper


class NormsConfig(BaseModel):
    delta: float = Field(default=0.1, gt=0.0, le=0.5)
    base_points: int = Field(default=16, ge=1, description="Base points per axis")
    modulations: int = Field(default=8, ge=1)
    p: int = Field(default=1, ge=1, le=2)
    q: int = Field(default=2, ge=1, le=2)
    k_max: int = Field(default=4, ge=0, le=4)
    quad_order: int = Field(default=128, ge=8)
    epsilons: List[float] = Field(default_factory=lambda: [0.1, 0.05, 0.025])
    q_max: int = Field(default=3, ge=1, le=3)


class OutputConfig(BaseModel):
    directory: str = "runs/default"


class ExperimentConfig(BaseModel):
    """Whole state of one experiment."""
    name: str = "experiment"
    seed: int = 0
    automorphism: AutomorphismSpec
    lattice: LatticeConfig = Field(default_factory=LatticeConfig)
    g: ObservableSpec
    h: ObservableSpec
    g_alt: Optional[ObservableSpec] = None
    h_alt: Optional[ObservableSpec] = None
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    tolerances: ToleranceConfig = Field(default_factory=ToleranceConfig)
    norms: NormsConfig = Field(default_factory=NormsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)


# ---------------------------------------------------------------- results


class CorrelationEntry(BaseModel):
    n: int
    re: float
    im: float


class CorrelationMetadata(BaseModel):
    """Everything needed to reproduce a series."""
    automorphism: AutomorphismSpec
    K: int
    N: int
    g: ObservableSpec
    h: ObservableSpec
    grid: int
    n_trunc: int
    engine: EngineKind
    pairing: str = "conjugate"


class CorrelationSeries(BaseModel):
    """C_n = <g, h o Phi^n> with conj on g."""
    entries: List[CorrelationEntry]
    metadata: CorrelationMetadata

    def values(self) -> np.ndarray:
        return np.array([complex(e.re, e.im) for e in self.entries], dtype=complex)

    @classmethod
    def from_values(cls, values, metadata: CorrelationMetadata) -> "CorrelationSeries":
        entries = [
            CorrelationEntry(n=n, re=float(np.real(v)), im=float(np.imag(v)))
            for n, v in enumerate(values)
        ]
        return cls(entries=entries, metadata=metadata)


class Resonance(BaseModel):
    re: float
    im: float
    modulus: float
    band: Optional[int] = None
    mu_re: Optional[float] = None
    mu_im: Optional[float] = None
    amp_re: float
    amp_im: float

    @property
    def xi(self) -> complex:
        return complex(self.re, self.im)

    @property
    def amplitude(self) -> complex:
        return complex(self.amp_re, self.amp_im)

    @property
    def mu(self) -> Optional[complex]:
        if self.mu_re is None or self.mu_im is None:
            return None
        return complex(self.mu_re, self.mu_im)


class CheckResult(BaseModel):
    name: str
    status: CheckStatus
    margin: Optional[float] = None
    detail: str = ""


class BandVerdict(BaseModel):
    regime: str
    passed: bool
    checks: List[CheckResult] = Field(default_factory=list)


class ResonanceReport(BaseModel):
    resonances: List[Resonance]
    residuals: List[float]
    singular_values: List[float]
    rank: int
    start: int = 0
    rank_tol: float
    lam: Optional[float] = None
    verdict: Optional[BandVerdict] = None

    def in_band(self, band: int) -> List[Resonance]:
        return [r for r in self.resonances if r.band == band]


class DecayEstimate(BaseModel):
    bands_removed: int
    slope: float
    expected_slope: Optional[float] = None
    relative_error: Optional[float] = None
    rate_matched: Optional[bool] = Field(default=None, description="relative_error <= decay_rel")
    window_start: int
    window_end: int
    max_remainder: float
    within_bound: Optional[bool] = None


class CrNormValue(BaseModel):
    """Sampled C^r norm and its Lipschitz-slack certificate."""
    order: int
    value: float = Field(ge=0.0)
    upper: float = Field(ge=0.0)


class DictionaryDescriptor(BaseModel):
    base_points_per_axis: int
    modulations: int
    delta: float
    width: float
    quad_order: int


class NormEstimate(BaseModel):
    value: float = Field(ge=0.0)
    p: int
    q: int
    semantics: str = "lower-bound"
    per_j: List[float] = Field(default_factory=list)
    dictionary: DictionaryDescriptor


class InequalityEntry(BaseModel):
    name: str
    lhs: float
    rhs: float
    ratio: Optional[float] = None
    verdict: CheckStatus
    semantics: Semantics
    detail: str = ""


class InequalityReport(BaseModel):
    p: int
    q: int
    k_max: int
    entries: List[InequalityEntry] = Field(default_factory=list)


class MollifierMarginRow(BaseModel):
    q: int
    epsilon: float
    approximation_margin: float
    cq_margin: float
    cq1_margin: float

    @property
    def passed(self) -> bool:
        return min(self.approximation_margin, self.cq_margin, self.cq1_margin) >= 0.0


class SlideRow(BaseModel):
    epsilon: float
    defect: float


class WindowRow(BaseModel):
    length: float
    direct: float
    windowed: float
    split_error: float
    abs_sum: float


class InvariantThetaRow(BaseModel):
    """Cut-off V-invariant theta sum on one component of the sector."""
    component: int
    radius: float
    per_j: List[float]
    value: float


class NormsReport(BaseModel):
    mollifier: List[MollifierMarginRow]
    inequalities: InequalityReport
    slide: List[SlideRow] = Field(default_factory=list)
    windows: List[WindowRow] = Field(default_factory=list)
    invariant: List[InvariantThetaRow] = Field(default_factory=list)
    checks: List[CheckResult] = Field(default_factory=list)


class PipelineOutcome(BaseModel):
    success: bool
    exit_code: int
    checks: List[CheckResult] = Field(default_factory=list)
    error: Optional[str] = None
    artifacts: Dict[str, str] = Field(default_factory=dict)
