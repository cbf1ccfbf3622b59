"""Blind identification of ARX models from output-only data.

The input is assumed to lie in a known subspace, ``u = D x``. The bilinear
product of ``x`` and the input coefficients ``b`` is lifted to a matrix
``X = x b^T`` and recovered by nuclear-norm minimization.
"""

__version__ = "0.1.0"

from .arx import (
    ArFit,
    ArxModel,
    InvalidDimensionError,
    ModelOrders,
    NoiseSpec,
    OutputSeries,
    RankDeficiencyWarning,
    ar_least_squares,
    arx_least_squares,
    residuals,
    simulate,
)
from .lifting import (
    LiftedEstimate,
    LiftedProblem,
    RecoveryReport,
    assemble_estimate,
    build_lifted_problem,
    check_recoverability,
    extract_rank1,
    scale_invariant_error,
)
from .solver import (
    InfeasibleError,
    LambdaSearchError,
    NotRecoverableError,
    SolverConfig,
    SolverError,
    SolverReport,
    lambda_min,
    lambda_search,
    oracle_linear_solve,
    solve_bounded,
    solve_noise_free,
    solve_penalized,
    svt,
)
from .subspace import (
    BasisFormatError,
    SubspaceBasis,
    basis_from_spec,
    dft_basis,
    gaussian_basis,
    load_basis,
    save_basis,
    zoh_basis,
)
