"""Forward-model interface, priors and observation noise."""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError

MAX_CONSECUTIVE_REJECTIONS = 10**6


class ForwardModel:
    """A Bayesian model for a static parameter.

    Subclasses provide a prior sampler, an unnormalised prior log-density and
    a per-observation log-likelihood.  All methods are vectorised over the
    rows of an ``(M, dim)`` position array.
    """

    dim = 1

    def sample_prior(self, rng, size):
        raise NotImplementedError

    def prior_log_density(self, positions):
        raise NotImplementedError

    def log_likelihood(self, positions, observation):
        raise NotImplementedError

    def joint_log_likelihood(self, positions, observations):
        """Sum of per-observation log-likelihoods."""
        total = np.zeros(np.shape(positions)[0])
        for obs in observations:
            total = total + self.log_likelihood(positions, obs)
        return total


@dataclass(frozen=True)
class TruncatedNormalPrior:
    """Normal density restricted to ``[lower, upper]``."""

    mean: float = 10.0
    std: float = 1.0
    lower: float = 0.0
    upper: float = 20.0

    def __post_init__(self):
        if not self.std > 0:
            raise ConfigurationError(f"prior std must be positive, got {self.std}")
        if not self.lower < self.upper:
            raise ConfigurationError(
                f"prior support is empty: lower={self.lower}, upper={self.upper}"
            )


@dataclass(frozen=True)
class GaussianNoise:
    """Additive ``N(0, variance)`` observation noise."""

    variance: float = 0.0025

    def __post_init__(self):
        if not self.variance > 0:
            raise ConfigurationError(f"noise variance must be positive, got {self.variance}")


def gaussian_log_likelihood(y, prediction, noise):
    """Unnormalised Gaussian log-likelihood ``-(y - prediction)**2 / (2 sigma^2)``."""
    r = np.subtract(y, prediction)
    return -(r * r) / (2.0 * noise.variance)


def sample_prior_array(prior, rng, size):
    """Draw ``size`` values from a truncated normal by rejection."""
    out = np.empty(size)
    filled = 0
    misses = 0
    while filled < size:
        need = size - filled
        # after a fully rejected round, draw in larger blocks
        batch = need if misses == 0 else max(need, 4096)
        draws = rng.normal(prior.mean, prior.std, size=batch)
        keep = draws[(draws >= prior.lower) & (draws <= prior.upper)][:need]
        if keep.size == 0:
            misses += batch
            if misses >= MAX_CONSECUTIVE_REJECTIONS:
                raise ConfigurationError(
                    f"{misses} consecutive prior draws fell outside "
                    f"[{prior.lower}, {prior.upper}]; the support misses the prior mass"
                )
            continue
        misses = 0
        out[filled : filled + keep.size] = keep
        filled += keep.size
    return out


def sample_prior(prior, rng):
    """Draw a single value from a truncated normal prior."""
    return float(sample_prior_array(prior, rng, 1)[0])


def prior_log_density(prior, g):
    """Unnormalised truncated-normal log-density; ``-inf`` off the support."""
    g = np.asarray(g, dtype=float)
    z = (g - prior.mean) / prior.std
    inside = (g >= prior.lower) & (g <= prior.upper)
    out = np.where(inside, -0.5 * z * z, -np.inf)
    return float(out) if out.ndim == 0 else out
