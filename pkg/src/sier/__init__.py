"""Sparse reduced-rank multivariate regression by signal extraction.

Fits Y = X B + noise where B is row-sparse and low-rank, by extracting
predictor/response loading pairs that maximize a penalized generalized
Rayleigh quotient; the rank-k prefix of the fitted decomposition is the
best rank-k approximation to the fitted signal.
"""

from ._kernels import COMPILED
from .errors import (
    DataError,
    DegenerateFitError,
    InternalConsistencyError,
    NumericalError,
    SierError,
    UnusableDesignError,
    ValidationError,
)
from .extractor import (
    ComponentResult,
    CrossMoment,
    PenaltyPair,
    SolverConfig,
    coefficient_matrix,
    cross_moment,
    estimate_w,
    fit_components,
    population_decomposition,
    ratio_objective,
    signal_fraction,
    solve_component,
)
from .model import (
    Dataset,
    FittedModel,
    SignalDecomposition,
    Standardizer,
    predict,
    selected_features,
    standardize_apply,
    standardize_fit,
)
from .numerics import (
    RandomStream,
    SvdResult,
    cholesky_factor,
    sample_ar1,
    sample_compound_symmetric,
    sample_mvn,
    soft_threshold,
    thin_svd,
)
from .simulate import (
    GroundTruth,
    SimulationSpec,
    StudyResult,
    approx_error_curve,
    case1_spec,
    case2_spec,
    case3_spec,
    gen_case1,
    gen_case2,
    gen_case3,
    gen_figure1,
    mspe,
    run_study,
    sample_noise,
    selection_metrics,
)
from .tuning import (
    DEFAULT_PAIRS,
    CvReport,
    TuningGrid,
    cross_validate,
    default_grid,
    max_components,
)

__version__ = "0.1.0"
