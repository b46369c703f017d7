"""Signed Dynkin correspondence between killed reversible Markov chains and
Gaussian fields with covariance ``(-Q o S)^-1``.

The analytic side (precision matrices, Schur complements, kriging weights)
lives in :mod:`signdynkin.chain`, :mod:`signdynkin.field` and
:mod:`signdynkin.elimination`; the path side (simulation with the sign
process and Monte Carlo estimators) lives in :mod:`signdynkin.paths`.
"""

__version__ = "0.1.0"

from .errors import (
    ChainFileError,
    ConvergenceError,
    DynkinError,
    InsufficientSamplesError,
    InvalidGeneratorError,
    JumpCapExceeded,
    NotPositiveDefiniteError,
    StructuralError,
)
from .chain import (
    EmbeddedChain,
    GeneratorMatrix,
    ValidationReport,
    covariance_direct,
    covariance_neumann,
    embedded_chain,
    expected_occupation,
    load_chain,
    schur_restrict,
    signed_precision,
    split_signed_precision,
    validate_generator,
)
from .field import (
    FieldFactor,
    PredictionResult,
    cond_independence_check,
    factor,
    gaussian_lhs_analytic,
    predict_direct,
    sample_field,
)
from .elimination import (
    EliminationState,
    eliminate_vertex,
    intermediate_coefficients,
    predict_by_elimination,
)
from .paths import (
    McConfig,
    McEstimate,
    PathRecord,
    hitting,
    mc_conditional_cov,
    mc_hitting_coefficients,
    mc_isomorphism_check,
    mc_measure_change,
    mc_mu_integral,
    mc_occupation_matrix,
    net_occupation,
    occupation,
    sample_path,
)
from .ou import (
    NoisyObsSpec,
    OuSpec,
    noisy_prediction,
    ou_covariance,
    ou_generator,
    signed_ou_covariance,
)
