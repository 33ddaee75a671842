"""Sequential importance sampling and sequential Monte Carlo for static parameters.

Both filters start from prior draws.  SIS only reweights.  SMC reweights,
resamples when the effective sample size falls to the threshold, and then
moves every particle with a random-walk Metropolis kernel that targets the
current posterior ``prior * L_1 * ... * L_t``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import ConfigurationError
from .kernels import RwmKernel, rwm_move
from .particle import (
    ParticleApproximation,
    ResampleDecision,
    effective_sample_size,
    monte_carlo,
    resample,
    reweight,
    weighted_mean,
    weighted_variance,
)

ALGORITHMS = ("sis", "smc")


@dataclass(frozen=True)
class FilterConfig:
    """Settings of a filter run.

    ``threshold_fraction``, ``mcmc_moves``, ``proposal_std`` and
    ``move_only_after_resample`` only affect SMC.  ``threads`` controls how
    many workers evaluate densities; results do not depend on it.
    """

    particle_count: int
    algorithm: str = "smc"
    threshold_fraction: float = 0.75
    mcmc_moves: int = 5
    proposal_std: float = 0.25
    seed: int = 0
    move_only_after_resample: bool = False
    threads: int = 1

    def __post_init__(self):
        if int(self.particle_count) != self.particle_count or self.particle_count < 2:
            raise ConfigurationError(
                f"particle_count must be an integer >= 2, got {self.particle_count!r}"
            )
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 0 < self.threshold_fraction <= 1:
            raise ConfigurationError(
                f"threshold_fraction must lie in (0, 1], got {self.threshold_fraction}"
            )
        if int(self.mcmc_moves) != self.mcmc_moves or self.mcmc_moves < 0:
            raise ConfigurationError(f"mcmc_moves must be a non-negative integer, got {self.mcmc_moves!r}")
        if not self.proposal_std > 0:
            raise ConfigurationError(f"proposal_std must be positive, got {self.proposal_std}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if int(self.threads) != self.threads or self.threads < 1:
            raise ConfigurationError(f"threads must be a positive integer, got {self.threads!r}")

    @property
    def threshold(self):
        return self.threshold_fraction * self.particle_count


@dataclass(frozen=True)
class StepRecord:
    """What happened while absorbing one observation (or batch)."""

    t: int
    ess: float
    resampled: bool
    log_evidence_increment: float
    post_mean: np.ndarray
    post_var: np.ndarray
    acceptance_rate: float = float("nan")


@dataclass
class FilterTrace:
    """Per-step records of a filter run.

    ``approximations[t]`` is the approximation after step ``t`` when the run
    retained them (index 0 is the prior sample); otherwise only the initial
    and final approximations are kept.
    """

    initial: ParticleApproximation
    final: ParticleApproximation
    records: list = field(default_factory=list)
    approximations: list = None

    def __len__(self):
        return len(self.records)

    @property
    def log_evidence(self):
        """Cumulative log-evidence estimate ``log Z_1 + ... + log Z_t``."""
        return float(sum(r.log_evidence_increment for r in self.records))

    @property
    def resample_count(self):
        return sum(r.resampled for r in self.records)

    @property
    def ess(self):
        return np.array([r.ess for r in self.records])

    @property
    def posterior_means(self):
        return np.array([r.post_mean for r in self.records])

    @property
    def posterior_variances(self):
        return np.array([r.post_var for r in self.records])


def posterior_log_density(model, observations):
    """Unnormalised log posterior ``log prior + sum of log-likelihoods``.

    Likelihoods are evaluated only where the prior density is positive.
    """
    observations = list(observations)

    def log_density(positions):
        positions = np.asarray(positions, dtype=float)
        lp = np.asarray(model.prior_log_density(positions), dtype=float)
        out = np.full(lp.shape, -np.inf)
        ok = np.isfinite(lp)
        if ok.any():
            out[ok] = lp[ok] + model.joint_log_likelihood(positions[ok], observations)
        return out

    return log_density


def _chunked(f, threads):
    if threads <= 1:
        return f

    def run(positions):
        parts = np.array_split(np.arange(positions.shape[0]), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda idx: np.asarray(f(positions[idx]), dtype=float), parts))
        return np.concatenate(results)

    return run


def _summarize(approx):
    return weighted_mean(approx), weighted_variance(approx)


def sis_step(approx, log_likelihood, t=1):
    """Reweight by one likelihood; positions stay where they are."""
    new, log_z = reweight(approx, log_likelihood)
    mean, var = _summarize(new)
    return new, StepRecord(t, effective_sample_size(new), False, log_z, mean, var)


def _smc_step(approx, ll, log_target, kernel, config, rng, t, evaluate=None):
    new, log_z = reweight(approx, ll)
    log_target = log_target + ll
    decision = ResampleDecision.decide(
        effective_sample_size(new), config.threshold_fraction * new.size
    )
    if decision.resampled:
        new, idx = resample(new, rng, return_indices=True)
        log_target = log_target[idx]
    acceptance = float("nan")
    moves = config.mcmc_moves
    if config.move_only_after_resample and not decision.resampled:
        moves = 0
    if moves > 0:
        m, n = new.positions.shape
        normals = rng.standard_normal((moves, m, n))
        uniforms = rng.random((moves, m))
        positions = np.array(new.positions)
        accepted = 0
        for k in range(moves):
            positions, log_target, acc = rwm_move(
                kernel, positions, log_target, normals[k], uniforms[k], evaluate
            )
            accepted += int(acc.sum())
        acceptance = accepted / (moves * m)
        new = ParticleApproximation._trusted(positions, np.array(new.log_weights))
    mean, var = _summarize(new)
    record = StepRecord(t, decision.ess, decision.resampled, log_z, mean, var, acceptance)
    return new, record, log_target


def smc_step(approx, log_likelihood, kernel, config, rng, t=1):
    """Reweight, resample if ``ESS <= threshold``, then apply the kernel.

    ``kernel`` must target the posterior after absorbing ``log_likelihood``.
    Returns the new approximation and a :class:`StepRecord` whose ``ess`` is
    the value before resampling.
    """
    ll = np.asarray(log_likelihood(approx.positions) if callable(log_likelihood) else log_likelihood, dtype=float)
    log_target = kernel.log_density(approx.positions) - ll
    new, record, _ = _smc_step(approx, ll, log_target, kernel, config, rng, t)
    return new, record


def run_filter(model, observations, config, batched=False, retain=False):
    """Filter a sequence of observations.

    Parameters
    ----------
    model : ForwardModel
    observations : sequence
        One observation per step, or with ``batched=True`` one sequence of
        observations per step whose log-likelihoods are summed.
    config : FilterConfig
    retain : bool
        Keep the approximation after every step in the trace.

    Returns
    -------
    FilterTrace
    """
    if batched:
        steps = [list(batch) for batch in observations]
    else:
        steps = [[obs] for obs in observations]
        if not steps:
            raise ConfigurationError("no observations to filter")
    approx = monte_carlo(model.sample_prior, config.particle_count, streams.stream(config.seed, streams.INIT))
    trace = FilterTrace(initial=approx, final=approx, approximations=[approx] if retain else None)
    smc = config.algorithm == "smc"
    log_target = np.asarray(model.prior_log_density(approx.positions), dtype=float) if smc else None
    absorbed = []
    for t, batch in enumerate(steps, start=1):
        ll = _chunked(lambda pos, b=batch: model.joint_log_likelihood(pos, b), config.threads)(
            np.asarray(approx.positions)
        )
        absorbed.extend(batch)
        if smc:
            target = posterior_log_density(model, tuple(absorbed))
            kernel = RwmKernel(target, config.proposal_std)
            approx, record, log_target = _smc_step(
                approx,
                ll,
                log_target,
                kernel,
                config,
                streams.stream(config.seed, streams.STEP, t),
                t,
                evaluate=_chunked(target, config.threads),
            )
        else:
            approx, record = sis_step(approx, ll, t)
        trace.records.append(record)
        if retain:
            trace.approximations.append(approx)
    trace.final = approx
    return trace
