"""Forward models: the pendulum, priors and noise, and the Gaussian-mean oracle."""

from .base import (
    ForwardModel,
    GaussianNoise,
    TruncatedNormalPrior,
    gaussian_log_likelihood,
    prior_log_density,
    sample_prior,
    sample_prior_array,
)
from .gaussian_mean import GaussianMeanModel, conjugate_posterior, rho_t
from .pendulum import (
    PendulumConfig,
    PendulumModel,
    calibrate_noise_variance,
    linear_pendulum_angle,
    pendulum_angle,
    pendulum_angles,
    pendulum_energy,
    pendulum_trajectory,
    reference_gravity,
    zero_crossing_times,
)

__all__ = [
    "ForwardModel",
    "GaussianMeanModel",
    "GaussianNoise",
    "PendulumConfig",
    "PendulumModel",
    "TruncatedNormalPrior",
    "calibrate_noise_variance",
    "conjugate_posterior",
    "gaussian_log_likelihood",
    "linear_pendulum_angle",
    "pendulum_angle",
    "pendulum_angles",
    "pendulum_energy",
    "pendulum_trajectory",
    "prior_log_density",
    "reference_gravity",
    "rho_t",
    "zero_crossing_times",
    "sample_prior",
    "sample_prior_array",
]
