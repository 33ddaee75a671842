"""Posterior summaries and accuracy checks for particle approximations."""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import trapezoid

from . import streams
from .errors import ConfigurationError, DegenerateSampleError
from .filters import run_filter
from .particle import (
    effective_sample_size,
    event_probability,
    integrate,
    weighted_variance,
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_CHUNK = 4096


@dataclass(frozen=True)
class KdeEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self):
        """Trapezoidal integral of the density over the grid."""
        return float(trapezoid(self.density, self.grid))


def _first_coordinate(approx):
    if approx.dim != 1:
        raise ConfigurationError(f"expected a one-dimensional approximation, got N={approx.dim}")
    return approx.positions[:, 0]


def silverman_bandwidth(approx):
    """Silverman's rule ``1.06 * sd * ESS**(-1/5)`` with weighted ``sd``."""
    _first_coordinate(approx)
    sd = float(np.sqrt(weighted_variance(approx)[0]))
    if sd == 0.0:
        raise DegenerateSampleError("weighted variance is zero; no default bandwidth exists")
    return 1.06 * sd * effective_sample_size(approx) ** (-0.2)


def kde(approx, grid, bandwidth=None):
    """Weighted Gaussian kernel density estimate on ``grid``.

    Parameters
    ----------
    approx : ParticleApproximation
        One-dimensional approximation.
    grid : array_like
        Strictly increasing evaluation points.
    bandwidth : float, optional
        Kernel standard deviation; Silverman's rule when omitted.
    """
    x = _first_coordinate(approx)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ConfigurationError("KDE grid must be strictly increasing")
    h = silverman_bandwidth(approx) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ConfigurationError(f"bandwidth must be positive, got {h}")
    w = approx.weights
    live = w > 0
    x, w = x[live], w[live]
    density = np.zeros(grid.size)
    for start in range(0, x.size, _CHUNK):
        z = (grid[:, None] - x[None, start : start + _CHUNK]) / h
        density += np.exp(-0.5 * z * z) @ w[start : start + _CHUNK]
    density /= h * _SQRT_2PI
    return KdeEstimate(grid, density, h)


@dataclass(frozen=True)
class ConvergenceStudy:
    """Spread of the final posterior-mean estimate across repeated runs."""

    particle_counts: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    estimates: np.ndarray
    slope: float

    @property
    def stds(self):
        return np.sqrt(self.variances)


def loglog_slope(particle_counts, variances):
    """Least-squares slope of ``log(variance)`` against ``log(M)``."""
    v = np.asarray(variances, dtype=float)
    if np.any(v <= 0) or v.size < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(np.asarray(particle_counts, dtype=float)), np.log(v), 1)
    return float(slope)


def convergence_study(model, observations, config, particle_counts, repetitions, seed=None, batched=False):
    """Repeat a filter run for several particle counts.

    Each run uses a seed derived from ``(seed, M, repetition)``, where
    ``seed`` defaults to ``config.seed``.  The statistic is the posterior mean
    of the first coordinate after the last observation.
    """
    if repetitions < 2:
        raise ConfigurationError(f"need at least 2 repetitions, got {repetitions}")
    seed = config.seed if seed is None else seed
    counts = np.asarray(particle_counts, dtype=int)
    estimates = np.empty((counts.size, repetitions))
    for i, m in enumerate(counts):
        for r in range(repetitions):
            run_config = replace(
                config, particle_count=int(m), seed=streams.derive_seed(seed, streams.REPLICATE, m, r)
            )
            trace = run_filter(model, observations, run_config, batched=batched)
            estimates[i, r] = trace.records[-1].post_mean[0] if trace.records else trace.final.positions[:, 0].mean()
    variances = estimates.var(axis=1, ddof=1)
    return ConvergenceStudy(
        particle_counts=counts,
        means=estimates.mean(axis=1),
        variances=variances,
        estimates=estimates,
        slope=loglog_slope(counts, variances),
    )


def deviation_probability_curve(approx, g_true, epsilons):
    """``P(|g - g_true| < eps * g_true)`` for every ``eps``."""
    x = _first_coordinate(approx)
    eps = np.asarray(epsilons, dtype=float).reshape(-1)
    dist = np.abs(x - g_true)
    probs = np.array(
        [event_probability(approx, lambda _p, e=e: dist < e * abs(g_true)) for e in eps]
    )
    return probs


def sis_error_bound(rho, M):
    """Bound ``4 rho / M`` on the mean squared error of importance sampling
    for test functions bounded by one."""
    if rho < 1:
        raise ConfigurationError(f"rho must be at least 1, got {rho}")
    if M < 1:
        raise ConfigurationError(f"M must be at least 1, got {M}")
    return 4.0 * rho / M


@dataclass(frozen=True)
class TanhFamily:
    """Test functions ``x -> tanh(scale * (x_j - center))`` for every
    coordinate ``j``, center and scale.  All are bounded by one and
    Lipschitz."""

    centers: np.ndarray
    scales: tuple = (0.5, 1.0, 2.0, 4.0)

    @classmethod
    def spanning(cls, *approximations, n_centers=21, scales=(0.5, 1.0, 2.0, 4.0)):
        lo = min(float(a.positions.min()) for a in approximations)
        hi = max(float(a.positions.max()) for a in approximations)
        return cls(np.linspace(lo, hi, n_centers), tuple(scales))

    def integrals(self, approx):
        """Integral of every family member, shape ``(dim, centers, scales)``."""
        w = approx.weights
        live = w > 0
        pos, w = approx.positions[live], w[live]
        scales = np.asarray(self.scales, dtype=float)
        out = np.zeros((approx.dim, self.centers.size, scales.size))
        for j in range(approx.dim):
            for start in range(0, pos.shape[0], _CHUNK):
                x = pos[start : start + _CHUNK, j]
                vals = np.tanh(scales[None, None, :] * (x[:, None, None] - self.centers[None, :, None]))
                out[j] += np.tensordot(w[start : start + _CHUNK], vals, axes=1)
        return out


def weak_distance(a, b, test_functions=None):
    """Largest difference of integrals over a family of bounded test functions.

    ``test_functions`` is a :class:`TanhFamily` or a sequence of vectorised
    callables.  The default is a tanh family whose centers span both
    supports.
    """
    if a.dim != b.dim:
        raise ConfigurationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if test_functions is None:
        test_functions = TanhFamily.spanning(a, b)
    if isinstance(test_functions, TanhFamily):
        return float(np.max(np.abs(test_functions.integrals(a) - test_functions.integrals(b))))
    return float(max(abs(integrate(a, f) - integrate(b, f)) for f in test_functions))
