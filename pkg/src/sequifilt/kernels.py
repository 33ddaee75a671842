"""Random-walk Metropolis kernels.

The kernel leaves its target density invariant.  It is used for SMC
rejuvenation and, run as a single long chain, as an MCMC reference sampler.
Target densities are unnormalised log-densities, vectorised over the rows of
an ``(M, N)`` array; ``-inf`` marks points outside the support, and proposals
landing there are rejected.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InvalidStateError


@dataclass(frozen=True)
class RwmKernel:
    """Gaussian random-walk proposal with Metropolis acceptance.

    Attributes
    ----------
    target_log_density : callable
        Maps an ``(M, N)`` array to ``M`` unnormalised log-densities.
    proposal_std : float or array_like
        Proposal standard deviation, scalar or one value per coordinate.
    """

    target_log_density: Callable
    proposal_std: object = 0.25

    def __post_init__(self):
        std = np.asarray(self.proposal_std, dtype=float)
        if not np.all(std > 0):
            raise ConfigurationError(f"proposal_std must be positive, got {self.proposal_std!r}")

    def log_density(self, positions):
        return np.asarray(self.target_log_density(positions), dtype=float).reshape(
            np.shape(positions)[0]
        )


def rwm_move(kernel, positions, log_density, normals, uniforms, evaluate=None):
    """One Metropolis step for every row of ``positions``.

    ``normals`` (shape of ``positions``) and ``uniforms`` (one per row) are
    the pre-drawn randomness, which keeps the result independent of how the
    target evaluation is scheduled.  ``evaluate`` replaces
    ``kernel.log_density`` when given (used for chunked evaluation).

    Returns the new positions, their log-densities and the acceptance mask.
    """
    proposal = positions + np.asarray(kernel.proposal_std, dtype=float) * normals
    lp_new = (evaluate or kernel.log_density)(proposal)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = lp_new - log_density
        accept = np.log(uniforms) < log_ratio
    accept &= ~np.isnan(log_ratio)
    new_positions = np.where(accept[:, None], proposal, positions)
    new_lp = np.where(accept, lp_new, log_density)
    return new_positions, new_lp, accept


def _as_point(x):
    arr = np.array(x, dtype=float).reshape(1, -1)
    return arr


def _check_start(kernel, point):
    lp = kernel.log_density(point)
    if not lp[0] > -np.inf:
        raise InvalidStateError(
            f"target density vanishes at the starting point {point[0].tolist()}"
        )
    return lp


def rwm_step(kernel, x, rng):
    """Single Metropolis transition from ``x``; returns ``(x_new, accepted)``."""
    point = _as_point(x)
    lp = _check_start(kernel, point)
    z = rng.standard_normal(point.shape)
    u = rng.random(1)
    new, _, acc = rwm_move(kernel, point, lp, z, u)
    out = new[0] if np.ndim(x) else new[0, 0]
    return out, bool(acc[0])


def _chain(kernel, x, n, rng, keep_from=None):
    point = _as_point(x)
    lp = _check_start(kernel, point)
    kept = []
    for i in range(n):
        z = rng.standard_normal(point.shape)
        u = rng.random(1)
        point, lp, _ = rwm_move(kernel, point, lp, z, u)
        if keep_from is not None and i >= keep_from:
            kept.append(point[0])
    return point[0], kept


def apply_n(kernel, x, n, rng):
    """Apply ``n`` Metropolis transitions and return the final state."""
    if n < 0:
        raise ConfigurationError(f"n must be non-negative, got {n}")
    if n == 0:
        return x
    final, _ = _chain(kernel, x, n, rng)
    return final if np.ndim(x) else float(final[0])


def mcmc_reference_run(kernel, x_init, n_samples, burn_in, rng):
    """Run a chain for ``n_samples`` steps and drop the first ``burn_in`` states.

    Returns an array of shape ``(n_samples - burn_in, N)``.
    """
    if not n_samples > burn_in >= 0:
        raise ConfigurationError(
            f"need n_samples > burn_in >= 0, got n_samples={n_samples}, burn_in={burn_in}"
        )
    _, kept = _chain(kernel, x_init, n_samples, rng, keep_from=burn_in)
    return np.array(kept)
