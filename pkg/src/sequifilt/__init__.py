"""Sequential Bayesian filtering of static model parameters.

Sequential importance sampling (SIS) and sequential Monte Carlo (SMC) with
resampling and random-walk Metropolis moves, a pendulum gravity-estimation
model and a conjugate Gaussian-mean model with a closed-form posterior.
"""

from .diagnostics import (
    ConvergenceStudy,
    KdeEstimate,
    TanhFamily,
    convergence_study,
    deviation_probability_curve,
    kde,
    loglog_slope,
    silverman_bandwidth,
    sis_error_bound,
    weak_distance,
)
from .errors import (
    ConfigurationError,
    DegenerateSampleError,
    DivergenceError,
    EvaluationError,
    InvalidStateError,
    LikelihoodCollapseError,
    MeasurementParseError,
    NumericalError,
    RejectedSampleError,
    SequifiltError,
)
from .filters import (
    FilterConfig,
    FilterTrace,
    StepRecord,
    posterior_log_density,
    run_filter,
    sis_step,
    smc_step,
)
from .io import MeasurementSet, parse_measurements
from . import streams
from .kernels import RwmKernel, apply_n, mcmc_reference_run, rwm_step
from .particle import (
    ParticleApproximation,
    ResampleDecision,
    effective_sample_size,
    event_probability,
    integrate,
    monte_carlo,
    resample,
    resample_indices,
    reweight,
    weighted_mean,
    weighted_variance,
)

__version__ = "0.1.0"
