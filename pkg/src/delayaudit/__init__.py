"""delayaudit: closure diagnostics for time-delay reconstructions.

Quantifies the information loss of delay/differential reconstructions of
nonlinear time series by estimating the intrinsic stochasticity (the mean
Frechet-median cost of empirical push-forward kernels), together with
singular-set classification, neighborhood-radius diagnostics, mass-separation
bound checks, and downstream impact experiments (CCM, EDMD).
"""

__version__ = "0.1.0"

from .dynamics import (
    DivergenceError,
    SystemParams,
    Trajectory,
    integrate_rk4,
    lie_derivatives,
    tangent_growth,
    vector_field,
)
from .embedding import (
    EmbeddingSpec,
    ReconstructedStates,
    delay_embed,
    differential_embed,
    pca3,
    transform_series,
)
from .jacobian import (
    SingularClass,
    classify_embedding,
    curvature_proxy,
    det_DF,
    grad_det_DF,
    stretching_proxy,
)
from .neighborhood import NeighborConfig, knn_theiler, radius_stats
from .stochasticity import (
    EmpiricalKernel,
    StochasticityReport,
    estar_curve,
    estimate_estar,
    geometric_median,
    pointwise_risk,
    push_forward_cloud,
)
from .diagnostics import FoldFracConfig, fold_frac, improvement_pct
from .bounds import (
    BranchDecomposition,
    BoundReport,
    cluster_kernel,
    lower_bound_check,
    pesin_filter,
    run_bound_pipeline,
    srb_weights,
    upper_bound_check,
)
from .downstream import CcmResult, EdmdModel, ccm, edmd_fit, edmd_rollout_nrmse
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "BoundReport",
    "BranchDecomposition",
    "CcmResult",
    "DivergenceError",
    "EdmdModel",
    "EmbeddingSpec",
    "EmpiricalKernel",
    "FoldFracConfig",
    "KERNEL_BACKEND",
    "NeighborConfig",
    "ReconstructedStates",
    "SingularClass",
    "StochasticityReport",
    "SystemParams",
    "Trajectory",
    "ccm",
    "classify_embedding",
    "cluster_kernel",
    "curvature_proxy",
    "delay_embed",
    "det_DF",
    "differential_embed",
    "edmd_fit",
    "edmd_rollout_nrmse",
    "estar_curve",
    "estimate_estar",
    "fold_frac",
    "geometric_median",
    "grad_det_DF",
    "improvement_pct",
    "integrate_rk4",
    "knn_theiler",
    "lie_derivatives",
    "lower_bound_check",
    "pca3",
    "pesin_filter",
    "pointwise_risk",
    "push_forward_cloud",
    "radius_stats",
    "run_bound_pipeline",
    "srb_weights",
    "stretching_proxy",
    "tangent_growth",
    "transform_series",
    "upper_bound_check",
    "vector_field",
]
