"""Nonlinear covariance shrinkage built on the deterministic equivalents of sample covariance resolvents."""

from __future__ import annotations

from .errors import (
    DegenerateSpectrum,
    DenominatorNearZero,
    EdgeDetectionFailure,
    InputError,
    NearSingularStability,
    NonConvergence,
    NonInvertible,
    NonSPD,
    NumericalError,
    PoleHit,
    QuadratureFailure,
    RMTError,
    SingularPencil,
)
from .kernels import (
    BlockObservable,
    DilationResolvent,
    KernelContext,
    apply_b12,
    apply_x12,
    is_regular,
    one_point_pre_regularize,
    one_point_regularize,
    pi_12,
    pi_123,
    spectral_point,
    two_point_regularize_sigma,
    xi_matrices,
)
from .overlaps import (
    DilationSpectrum,
    build_dilation,
    empirical_overlap,
    overlap_error_envelope,
    predicted_overlap_uu,
    predicted_overlap_vv,
    predicted_overlap_xi,
)
from .shrinkage import (
    LossKind,
    Mode,
    SampleDecomposition,
    ShrinkageResult,
    assemble_estimator,
    loss,
    oracle_shrinkage,
    shrink,
    shrink_frobenius,
    shrink_inverse_frobenius,
    transitional_shrinkage,
)
from .simlab import SimulationConfig, SimulationReport, generate_sample, rigidity_report, run_study
from .spectral import (
    PopulationSpectrum,
    SupportStructure,
    boundary_stieltjes,
    density,
    find_support,
    solve_stieltjes,
)
from .verification import run_kernel_suite

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_") and name != "annotations"]
