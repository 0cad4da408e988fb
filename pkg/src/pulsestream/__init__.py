"""Compressive sensing and recovery of pulse streams.

A pulse stream is a sparse spike train circularly convolved with a short
unknown pulse.  The package provides the signal model, structured linear
operators, random sampling, best separated-support approximation, the
recovery algorithms with their baselines, and an experiment harness.
"""
from .errors import (
    DomainMismatchError,
    InstanceGenerationError,
    IntegralityError,
    ModelError,
    PulseStreamError,
    SignalFormatError,
)
from .linop import (
    CirculantOperator,
    ColumnRestriction,
    LeastSquaresReport,
    apply_restricted,
    apply_restricted_transpose,
    least_squares,
    quasi_toeplitz_pinv_apply,
    solve_least_squares,
)
from .model_approx import (
    ApproxProblem,
    ApproxSolution,
    best_approx_brute,
    best_approx_dp,
    best_approx_greedy,
    best_approx_lp,
    prune_to_model,
)
from .recovery import (
    RecoveryConfig,
    RecoveryResult,
    am_exhaustive,
    am_inner,
    anchor_pulse_closed_form,
    anchor_pulse_fixed_point,
    block_cosamp,
    cosamp,
    iterative_support_estimation,
    oracle_decoder,
)
from .sampling import (
    IsometryReport,
    SamplingMatrix,
    add_noise,
    empirical_isometry,
    gaussian_matrix,
    identity_matrix,
    measure,
    measurement_bound,
)
from .signal_model import (
    Domain,
    ImpulseResponse,
    PulseInstance,
    PulseModel,
    SpikeStream,
    Support,
    circular_convolve,
    count_supports,
    enumerate_supports,
    is_in_model,
    random_instance,
)

__version__ = "0.1.0"
