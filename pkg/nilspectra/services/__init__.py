from .heisenberg import GroupElement, LatticeElement, LieVector
from .automorphism import PartialHypAuto, build
from .sector import SectorFunction, theta_atom, torus_mode
from .transfer import TransferEvaluator, correlate
from .resonance import band_analysis, pencil_fit, residual_decay
from .norms import TestFunction, cr_norm, mollify
from .anisotropic import ell, estimate_norm, inequality_experiments
from .storage_service import ArtifactStore
from .pipeline_workflow import VerificationWorkflow, run_pipeline

__all__ = [
    "GroupElement",
    "LatticeElement",
    "LieVector",
    "PartialHypAuto",
    "build",
    "SectorFunction",
    "theta_atom",
    "torus_mode",
    "TransferEvaluator",
    "correlate",
    "pencil_fit",
    "band_analysis",
    "residual_decay",
    "TestFunction",
    "cr_norm",
    "mollify",
    "ell",
    "estimate_norm",
    "inequality_experiments",
    "ArtifactStore",
    "VerificationWorkflow",
    "run_pipeline",
]
