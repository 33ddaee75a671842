"""Frictionless planar pendulum ``x'' = -(g / l) sin x`` and its likelihood.

The angle at an observation time is obtained with classical fixed-step RK4.
Every time ``tau`` is reached by ``floor(tau / h)`` full steps on the grid
``k * h`` followed by one shortened step, so evaluating several times in one
ascending pass gives exactly what separate runs from zero would give.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ..errors import ConfigurationError, DivergenceError
from .base import (
    ForwardModel,
    GaussianNoise,
    TruncatedNormalPrior,
    gaussian_log_likelihood,
    prior_log_density,
    sample_prior_array,
)

_DIVERGENCE_CHECK_EVERY = 256


@dataclass(frozen=True)
class PendulumConfig:
    """Physical and numerical constants of the pendulum initial value problem.

    Attributes
    ----------
    length : float
        String length in metres.
    initial_angle : float
        ``x(0)`` in radians, ``|x0| < pi``.
    initial_velocity : float
        ``x'(0)`` in radians per second.
    rk4_step : float
        Fixed RK4 step in seconds.
    """

    length: float = 7.4
    initial_angle: float = math.pi / 36
    initial_velocity: float = 0.0
    rk4_step: float = 1e-3

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigurationError(f"pendulum length must be positive, got {self.length}")
        if not self.rk4_step > 0:
            raise ConfigurationError(f"rk4_step must be positive, got {self.rk4_step}")
        if not abs(self.initial_angle) < math.pi:
            raise ConfigurationError(f"|initial_angle| must be below pi, got {self.initial_angle}")
        if not math.isfinite(self.initial_velocity):
            raise ConfigurationError("initial_velocity must be finite")


def reference_gravity(latitude, altitude):
    """Normal gravity in m/s^2 at ``latitude`` degrees and ``altitude`` metres."""
    phi = math.radians(latitude)
    return 9.780327 * (
        1 + 5.3024e-3 * math.sin(phi) ** 2 - 5.8e-6 * math.sin(2 * phi) ** 2
    ) - 1.965e-6 * altitude


def _rk4_step(x, v, k, h):
    b1 = -k * np.sin(x)
    a2 = v + 0.5 * h * b1
    b2 = -k * np.sin(x + 0.5 * h * v)
    a3 = v + 0.5 * h * b2
    b3 = -k * np.sin(x + 0.5 * h * a2)
    a4 = v + h * b3
    b4 = -k * np.sin(x + h * a3)
    return (
        x + (h / 6.0) * (v + 2.0 * a2 + 2.0 * a3 + a4),
        v + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )


def _split_times(taus, h):
    """Full-step count and remainder for every time."""
    n = np.floor(taus / h).astype(np.int64)
    rem = taus - n * h
    # floor(tau / h) can overshoot by one when tau / h rounds up
    over = rem < 0
    n[over] -= 1
    rem[over] = taus[over] - n[over] * h
    return n, rem


def _integrate(k, x0, v0, taus, h):
    """Angles ``x(tau)`` for frequencies ``k = g / l``.

    ``k``, ``x0`` and ``v0`` broadcast to a common shape ``(M,)``; the result
    has shape ``(M, len(taus))``.
    """
    k, x0, v0 = np.broadcast_arrays(
        np.asarray(k, dtype=float), np.asarray(x0, dtype=float), np.asarray(v0, dtype=float)
    )
    k = k.reshape(-1)
    x = x0.reshape(-1).copy()
    v = v0.reshape(-1).copy()
    taus = np.asarray(taus, dtype=float).reshape(-1)
    if taus.size == 0:
        return np.empty((k.size, 0))
    n, rem = _split_times(taus, h)
    stops = np.unique(n)
    saved_x = np.empty((stops.size, k.size))
    saved_v = np.empty((stops.size, k.size))
    j = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(int(stops[-1]) + 1):
            if step == stops[j]:
                if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
                    raise DivergenceError(step * h)
                saved_x[j] = x
                saved_v[j] = v
                j += 1
                if j == stops.size:
                    break
            x, v = _rk4_step(x, v, k, h)
            if step % _DIVERGENCE_CHECK_EVERY == 0 and not (
                np.all(np.isfinite(x)) and np.all(np.isfinite(v))
            ):
                raise DivergenceError((step + 1) * h)
    slot = np.searchsorted(stops, n)
    xs, vs = saved_x[slot], saved_v[slot]
    r = rem[:, None]
    with np.errstate(over="ignore", invalid="ignore"):
        stepped, _ = _rk4_step(xs, vs, k[None, :], r)
    out = np.where(r > 0, stepped, xs).T
    if not np.all(np.isfinite(out)):
        raise DivergenceError(float(taus.max()))
    return out


def pendulum_angles(g, taus, config):
    """Angles for every ``g`` (rows) at every time in ``taus`` (columns).

    Integrates the nonlinear IVP directly with fixed-step RK4.
    """
    g = np.atleast_1d(np.asarray(g, dtype=float))
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(g < 0):
        raise ConfigurationError("gravitational acceleration must be non-negative")
    if np.any(taus < 0):
        raise ConfigurationError("observation times must be non-negative")
    return _integrate(
        g / config.length, config.initial_angle, config.initial_velocity, taus, config.rk4_step
    )


def pendulum_angle(g, tau, config):
    """Angle ``x(tau; g)`` in radians of the nonlinear pendulum."""
    return float(pendulum_angles([g], [tau], config)[0, 0])


def pendulum_trajectory(g, t_end, config):
    """Times, angles and angular velocities from 0 to ``t_end``.

    Times are the RK4 grid ``k * h``, followed by ``t_end`` itself when it is
    not a grid point (reached by one shortened step).
    """
    if g < 0:
        raise ConfigurationError("gravitational acceleration must be non-negative")
    if t_end < 0:
        raise ConfigurationError("t_end must be non-negative")
    h = config.rk4_step
    steps, rem = _split_times(np.array([float(t_end)]), h)
    n, rem = int(steps[0]), float(rem[0])
    k = np.array([g / config.length])
    x = np.array([config.initial_angle])
    v = np.array([config.initial_velocity])
    size = n + 1 + (rem > 0)
    xs = np.empty(size)
    vs = np.empty(size)
    xs[0], vs[0] = x[0], v[0]
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            x, v = _rk4_step(x, v, k, h)
            xs[i + 1], vs[i + 1] = x[0], v[0]
        if rem > 0:
            x, v = _rk4_step(x, v, k, rem)
            xs[-1], vs[-1] = x[0], v[0]
    bad = ~(np.isfinite(xs) & np.isfinite(vs))
    times = np.arange(n + 1) * h
    if rem > 0:
        times = np.append(times, float(t_end))
    if bad.any():
        raise DivergenceError(float(times[np.argmax(bad)]))
    return times, xs, vs


def pendulum_energy(x, v, g, config):
    """Conserved quantity ``l v^2 / 2 - g cos x`` (per unit mass and length)."""
    return 0.5 * config.length * np.square(v) - g * np.cos(x)


def linear_pendulum_angle(g, tau, config):
    """Small-angle solution ``x0 cos(tau sqrt(g / l))``; requires ``v0 = 0``."""
    if config.initial_velocity != 0:
        raise ConfigurationError("the linearised solution assumes zero initial velocity")
    return config.initial_angle * np.cos(np.multiply(tau, np.sqrt(np.divide(g, config.length))))


class _MasterTrajectory:
    """RK4 solution of ``u'' = -sin u`` with ``u'(0) = 0`` on a fixed grid.

    With zero initial velocity, ``x(tau; g) = u(tau * sqrt(g / l))`` for every
    ``g``, so a single trajectory serves all particles.  Queries take one
    shortened RK4 step from the nearest grid point below.
    """

    def __init__(self, x0, h):
        self.x0 = float(x0)
        self.h = float(h)
        self._u = np.array([self.x0])
        self._w = np.array([0.0])

    def _extend(self, n_needed):
        have = self._u.size - 1
        if n_needed <= have:
            return
        target = max(n_needed, 2 * have, 1024)
        u = np.empty(target + 1)
        w = np.empty(target + 1)
        u[: have + 1] = self._u
        w[: have + 1] = self._w
        x, v, h = float(u[have]), float(w[have]), self.h
        sin = math.sin
        for i in range(have, target):
            b1 = -sin(x)
            a2 = v + 0.5 * h * b1
            b2 = -sin(x + 0.5 * h * v)
            a3 = v + 0.5 * h * b2
            b3 = -sin(x + 0.5 * h * a2)
            a4 = v + h * b3
            b4 = -sin(x + h * a3)
            x, v = (
                x + (h / 6.0) * (v + 2.0 * a2 + 2.0 * a3 + a4),
                v + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            )
            u[i + 1] = x
            w[i + 1] = v
        self._u, self._w = u, w

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        flat = s.reshape(-1)
        n, rem = _split_times(flat, self.h)
        self._extend(int(n.max()) if n.size else 0)
        x, _ = _rk4_step(self._u[n], self._w[n], 1.0, rem)
        x = np.where(rem > 0, x, self._u[n])
        return x.reshape(s.shape)


class PendulumModel(ForwardModel):
    """Gravity estimation from angle observations of a pendulum.

    An observation is a pair ``(tau, angle)``.  ``method`` selects how angles
    are computed: ``"direct"`` integrates every particle in physical time,
    ``"rescaled"`` reuses one dimensionless trajectory (zero initial velocity
    only), ``"auto"`` picks ``"rescaled"`` whenever it applies.
    """

    dim = 1

    def __init__(self, config, prior=None, noise=None, method="auto"):
        self.config = config
        self.prior = prior if prior is not None else TruncatedNormalPrior()
        self.noise = noise if noise is not None else GaussianNoise()
        if method not in ("auto", "direct", "rescaled"):
            raise ConfigurationError(f"unknown pendulum method {method!r}")
        if method == "rescaled" and config.initial_velocity != 0:
            raise ConfigurationError("the rescaled solver requires zero initial velocity")
        if method == "auto":
            method = "rescaled" if config.initial_velocity == 0 else "direct"
        self.method = method
        self._master = (
            _MasterTrajectory(config.initial_angle, config.rk4_step)
            if method == "rescaled"
            else None
        )

    def predict(self, g, taus):
        """Model angles, shape ``(len(g), len(taus))``."""
        g = np.asarray(g, dtype=float).reshape(-1)
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        if self._master is None:
            return pendulum_angles(g, taus, self.config)
        if np.any(g < 0):
            raise ConfigurationError("gravitational acceleration must be non-negative")
        if np.any(taus < 0):
            raise ConfigurationError("observation times must be non-negative")
        omega = np.sqrt(g / self.config.length)
        return self._master(omega[:, None] * taus[None, :])

    def sample_prior(self, rng, size):
        return sample_prior_array(self.prior, rng, size)[:, None]

    def prior_log_density(self, positions):
        return prior_log_density(self.prior, np.asarray(positions)[:, 0])

    def log_likelihood(self, positions, observation):
        tau, angle = observation
        pred = self.predict(np.asarray(positions)[:, 0], [tau])[:, 0]
        return gaussian_log_likelihood(angle, pred, self.noise)

    def joint_log_likelihood(self, positions, observations):
        observations = list(observations)
        if not observations:
            return np.zeros(np.shape(positions)[0])
        taus = np.array([o[0] for o in observations], dtype=float)
        angles = np.array([o[1] for o in observations], dtype=float)
        pred = self.predict(np.asarray(positions)[:, 0], taus)
        return gaussian_log_likelihood(angles[None, :], pred, self.noise).sum(axis=1)


def zero_crossing_times(config, g, count):
    """The first ``count`` times at which the pendulum passes ``x = 0``.

    These are the times an observer with a perfect stopwatch would record for
    a pendulum with gravity ``g``; they serve as synthetic measurement times.
    """
    model = PendulumModel(config, method="auto")

    def angle(t):
        return float(model.predict([g], [t])[0, 0])

    if g <= 0:
        raise ConfigurationError("zero crossings need positive gravity")
    if angle(0.0) == 0.0:
        raise ConfigurationError("pendulum starts at x = 0 and never crosses it")
    # generous horizon: the nonlinear period exceeds the linear one
    horizon = (count + 1) * math.pi * math.sqrt(config.length / g) * 4.0
    grid = np.linspace(0.0, horizon, int(horizon / 0.02) + 2)
    xs = model.predict([g], grid)[0]
    times = []
    for i in np.flatnonzero(np.sign(xs[:-1]) * np.sign(xs[1:]) <= 0):
        if xs[i] == 0.0 and i > 0:
            times.append(float(grid[i]))
        elif xs[i + 1] != 0.0:
            times.append(brentq(angle, grid[i], grid[i + 1], xtol=1e-12))
        if len(times) == count:
            break
    if len(times) < count:
        raise ConfigurationError(f"found only {len(times)} zero crossings")
    return np.array(times)


def calibrate_noise_variance(
    config,
    g_nominal,
    schedule,
    n_mc,
    rng,
    time_noise_mean=0.45,
    time_noise_var=0.01,
):
    """Monte Carlo estimate of the angle error variance caused by timing error.

    ``schedule`` holds the nominal measurement times; see
    :func:`zero_crossing_times` for synthetic times at the prescribed angle.

    Every replicate shifts each scheduled time by an independent
    ``N(time_noise_mean, time_noise_var)`` draw; the squared differences
    between angles at shifted and nominal times are pooled and averaged.
    """
    if n_mc < 100:
        raise ConfigurationError(f"n_mc must be at least 100, got {n_mc}")
    if time_noise_var < 0:
        raise ConfigurationError("time noise variance must be non-negative")
    schedule = np.asarray(schedule, dtype=float).reshape(-1)
    shifts = rng.normal(time_noise_mean, math.sqrt(time_noise_var), size=(n_mc, schedule.size))
    perturbed = schedule[None, :] + shifts
    if np.any(perturbed < 0):
        raise ConfigurationError("time noise produced a negative observation time")
    nominal = pendulum_angles([g_nominal], schedule, config)[0]
    shifted = pendulum_angles([g_nominal], perturbed.reshape(-1), config)[0]
    diff = shifted.reshape(n_mc, schedule.size) - nominal[None, :]
    return float(np.mean(diff * diff))
