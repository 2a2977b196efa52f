from .schemas import (
    EngineKind,
    CheckStatus,
    Semantics,
    AutomorphismSpec,
    ObservableTerm,
    ObservableSpec,
    LatticeConfig,
    NumericsConfig,
    ToleranceConfig,
    NormsConfig,
    OutputConfig,
    ExperimentConfig,
    CorrelationEntry,
    CorrelationMetadata,
    CorrelationSeries,
    Resonance,
    CheckResult,
    BandVerdict,
    ResonanceReport,
    DecayEstimate,
    CrNormValue,
    DictionaryDescriptor,
    NormEstimate,
    InequalityEntry,
    InequalityReport,
    MollifierMarginRow,
    SlideRow,
    WindowRow,
    InvariantThetaRow,
    NormsReport,
    PipelineOutcome,
)

__all__ = [
    "EngineKind",
    "CheckStatus",
    "Semantics",
    "AutomorphismSpec",
    "ObservableTerm",
    "ObservableSpec",
    "LatticeConfig",
    "NumericsConfig",
    "ToleranceConfig",
    "NormsConfig",
    "OutputConfig",
    "ExperimentConfig",
    "CorrelationEntry",
    "CorrelationMetadata",
    "CorrelationSeries",
    "Resonance",
    "CheckResult",
    "BandVerdict",
    "ResonanceReport",
    "DecayEstimate",
    "CrNormValue",
    "DictionaryDescriptor",
    "NormEstimate",
    "InequalityEntry",
    "InequalityReport",
    "MollifierMarginRow",
    "SlideRow",
    "WindowRow",
    "InvariantThetaRow",
    "NormsReport",
    "PipelineOutcome",
]
