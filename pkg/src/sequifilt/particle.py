"""Weighted particle approximations of probability measures.

A :class:`ParticleApproximation` stores ``M`` parameter points of dimension
``N`` together with normalised log-weights.  All operations return new
approximations; the stored arrays are read-only.

Functions of a parameter point (test functions, predicates, log-likelihoods)
are *vectorised*: they receive the ``(M, N)`` position array and return one
value per row.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import (
    ConfigurationError,
    EvaluationError,
    LikelihoodCollapseError,
    RejectedSampleError,
)

NORMALIZATION_TOL = 1e-10


def _as_positions(positions):
    arr = np.array(positions, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise ConfigurationError(f"positions must be at most 2-D, got shape {arr.shape}")
    return arr


def _normalize(log_weights):
    shift = logsumexp(log_weights)
    out = log_weights - shift
    # one more pass absorbs the rounding of the first subtraction
    out -= logsumexp(out)
    return out, shift


class ParticleApproximation:
    """``M`` weighted points ``sum_i W_i delta_{X_i}``.

    Parameters
    ----------
    positions : array_like, shape (M,) or (M, N)
        Particle positions.  One-dimensional input is treated as ``N = 1``.
    log_weights : array_like, shape (M,), optional
        Unnormalised log-weights; ``-inf`` marks a particle with zero weight.
        Defaults to uniform weights.
    """

    __slots__ = ("_positions", "_log_weights")

    def __init__(self, positions, log_weights=None):
        pos = _as_positions(positions)
        m = pos.shape[0]
        if m < 1:
            raise ConfigurationError("a particle approximation needs at least one particle")
        if not np.all(np.isfinite(pos)):
            bad = int(np.flatnonzero(~np.isfinite(pos).all(axis=1))[0])
            raise ConfigurationError(f"position of particle {bad} is not finite")
        if log_weights is None:
            lw = np.full(m, -np.log(m))
        else:
            lw = np.array(log_weights, dtype=float).reshape(-1)
            if lw.shape[0] != m:
                raise ConfigurationError(
                    f"{m} positions but {lw.shape[0]} log-weights"
                )
            if np.any(np.isnan(lw)) or np.any(lw == np.inf):
                raise ConfigurationError("log-weights must be finite or -inf")
            if not np.any(np.isfinite(lw)):
                raise ConfigurationError("at least one particle needs positive weight")
            lw, _ = _normalize(lw)
        pos.setflags(write=False)
        lw.setflags(write=False)
        self._positions = pos
        self._log_weights = lw

    @classmethod
    def from_samples(cls, samples):
        """Equally weighted approximation of a sample collection."""
        return cls(samples)

    @classmethod
    def _trusted(cls, positions, log_weights):
        obj = cls.__new__(cls)
        positions.setflags(write=False)
        log_weights.setflags(write=False)
        obj._positions = positions
        obj._log_weights = log_weights
        return obj

    @property
    def positions(self):
        return self._positions

    @property
    def log_weights(self):
        return self._log_weights

    @property
    def weights(self):
        return np.exp(self._log_weights)

    @property
    def size(self):
        return self._positions.shape[0]

    @property
    def dim(self):
        return self._positions.shape[1]

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"ParticleApproximation(M={self.size}, N={self.dim}, ess={effective_sample_size(self):.4g})"


@dataclass(frozen=True)
class ResampleDecision:
    """Outcome of comparing the effective sample size with a threshold."""

    ess: float
    threshold: float
    resampled: bool

    @classmethod
    def decide(cls, ess, threshold):
        return cls(float(ess), float(threshold), bool(ess <= threshold))


def _evaluate(f, positions):
    values = np.asarray(f(positions), dtype=float)
    m = positions.shape[0]
    if values.size != m:
        raise ConfigurationError(
            f"vectorised function returned {values.size} values for {m} particles"
        )
    return values.reshape(m)


def monte_carlo(prior_sampler, M, rng):
    """Standard Monte Carlo estimate with ``M`` independent prior draws.

    ``prior_sampler(rng, size)`` must return ``size`` parameter points.
    """
    if int(M) != M or M < 1:
        raise ConfigurationError(f"particle count must be a positive integer, got {M!r}")
    draws = _as_positions(prior_sampler(rng, int(M)))
    if draws.shape[0] != M:
        raise ConfigurationError(f"sampler returned {draws.shape[0]} draws, expected {M}")
    finite = np.isfinite(draws).all(axis=1)
    if not finite.all():
        idx = int(np.flatnonzero(~finite)[0])
        raise RejectedSampleError(idx, draws[idx].tolist())
    return ParticleApproximation._trusted(draws, np.full(int(M), -np.log(M)))


def integrate(approx, f):
    """Return ``sum_i W_i f(X_i)``."""
    values = _evaluate(f, approx.positions)
    w = approx.weights
    live = w > 0
    bad = ~np.isfinite(values) & live
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise EvaluationError(idx, values[idx])
    return float(np.dot(w[live], values[live]))


def event_probability(approx, predicate):
    """Posterior probability of the set where ``predicate`` holds."""
    mask = np.asarray(predicate(approx.positions), dtype=bool).reshape(approx.size)
    p = float(np.sum(approx.weights[mask]))
    return min(max(p, 0.0), 1.0)


def reweight(approx, log_likelihood):
    """Importance reweighting by a likelihood.

    Returns the reweighted approximation and the log of the evidence estimate
    ``log sum_i W_i L(X_i)``.  Positions are not touched; particles with zero
    likelihood keep their position with log-weight ``-inf``.
    """
    if callable(log_likelihood):
        ll = _evaluate(log_likelihood, approx.positions)
    else:
        ll = np.asarray(log_likelihood, dtype=float).reshape(approx.size)
    if np.any(np.isnan(ll)) or np.any(ll == np.inf):
        idx = int(np.flatnonzero(np.isnan(ll) | (ll == np.inf))[0])
        raise EvaluationError(idx, ll[idx])
    combined = approx.log_weights + ll
    if not np.any(np.isfinite(combined)):
        raise LikelihoodCollapseError(
            "likelihood vanishes on every particle with positive weight; "
            "the data are incompatible with the current approximation"
        )
    new_lw, log_z = _normalize(combined)
    return ParticleApproximation._trusted(approx.positions, new_lw), float(log_z)


def effective_sample_size(approx):
    """``1 / sum_i W_i**2``."""
    return float(np.exp(-logsumexp(2.0 * approx.log_weights)))


def resample_indices(weights, uniforms):
    """Inverse-CDF selection ``j = min{k : W_1 + ... + W_k >= U}``.

    ``uniforms`` must lie in ``(0, 1]``.  The cumulative sum is rescaled so
    that its last entry is exactly 1.0.
    """
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return np.searchsorted(cdf, uniforms, side="left")


def resample(approx, rng, return_indices=False):
    """Multinomial resampling to ``M`` equally weighted particles.

    With ``return_indices=True`` the ancestor index of every output particle
    is returned as well.
    """
    m = approx.size
    # 1 - U maps [0, 1) onto (0, 1] so that U = 0 cannot pick a zero-weight head
    u = 1.0 - rng.random(m)
    idx = resample_indices(approx.weights, u)
    out = ParticleApproximation._trusted(
        approx.positions[idx].copy(), np.full(m, -np.log(m))
    )
    return (out, idx) if return_indices else out


def weighted_mean(approx):
    """Posterior mean, one entry per coordinate."""
    return approx.weights @ approx.positions


def weighted_variance(approx):
    """Per-coordinate weighted variance ``E[X^2] - E[X]^2`` floored at zero."""
    w = approx.weights
    mean = w @ approx.positions
    second = w @ approx.positions**2
    return np.maximum(second - mean**2, 0.0)
