"""Conjugate Gaussian-mean model with closed-form posterior.

Data ``y_s ~ N(m, 1)`` and prior ``m ~ N(0, 1)`` give the posterior
``N(S_t / (t + 1), 1 / (t + 1))`` with ``S_t = y_1 + ... + y_t``.  The
closed form makes the model an exact oracle for filter output.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from .base import ForwardModel


@dataclass(frozen=True)
class GaussianMeanModel(ForwardModel):
    """Unknown mean of a unit-variance normal under a standard normal prior.

    ``running_sum`` and ``count`` track the data seen so far; use
    :meth:`observe` to absorb a new observation.
    """

    true_mean: float = 0.0
    running_sum: float = 0.0
    count: int = 0

    dim = 1

    def __post_init__(self):
        if self.count < 0:
            raise ConfigurationError(f"count must be non-negative, got {self.count}")

    def observe(self, y):
        return GaussianMeanModel(self.true_mean, self.running_sum + float(y), self.count + 1)

    def simulate(self, rng, n):
        """``n`` synthetic observations from ``N(true_mean, 1)``."""
        return rng.normal(self.true_mean, 1.0, size=n)

    def sample_prior(self, rng, size):
        return rng.standard_normal((size, 1))

    def prior_log_density(self, positions):
        m = np.asarray(positions)[:, 0]
        return -0.5 * m * m

    def log_likelihood(self, positions, observation):
        r = float(observation) - np.asarray(positions)[:, 0]
        return -0.5 * r * r

    def joint_log_likelihood(self, positions, observations):
        ys = np.asarray(list(observations), dtype=float)
        m = np.asarray(positions)[:, 0]
        if ys.size == 0:
            return np.zeros(m.size)
        r = ys[None, :] - m[:, None]
        return -0.5 * np.sum(r * r, axis=1)


def conjugate_posterior(model):
    """Exact posterior ``(mean, variance)`` after ``model.count`` observations."""
    t = model.count
    return model.running_sum / (t + 1), 1.0 / (t + 1)


def rho_t(model):
    """Second-moment ratio of the joint likelihood under the prior.

    ``M / rho_t`` is the effective sample size of importance sampling from
    the prior.
    """
    t = model.count
    s = model.running_sum
    return (t + 1) / math.sqrt(2 * t + 1) * math.exp(s * s / ((2 * t + 1) * (t + 1)))
