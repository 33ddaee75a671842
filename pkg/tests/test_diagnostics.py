import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import quad

from sequifilt import (
    ConfigurationError,
    DegenerateSampleError,
    FilterConfig,
    ParticleApproximation,
    TanhFamily,
    convergence_study,
    deviation_probability_curve,
    kde,
    loglog_slope,
    run_filter,
    silverman_bandwidth,
    sis_error_bound,
    weak_distance,
)
from sequifilt.models import ForwardModel, GaussianMeanModel, conjugate_posterior, rho_t


class PointMass(ForwardModel):
    """Prior concentrated at 3.0 with a flat likelihood."""

    dim = 1

    def sample_prior(self, rng, size):
        return np.full((size, 1), 3.0)

    def prior_log_density(self, positions):
        return np.where(positions[:, 0] == 3.0, 0.0, -np.inf)

    def log_likelihood(self, positions, observation):
        return np.zeros(len(positions))


class TestKde:
    def test_single_particle(self):
        grid = np.linspace(0.0, 10.0, 101)
        est = kde(ParticleApproximation([5.0]), grid, bandwidth=1.0)
        np.testing.assert_allclose(est.density, stats.norm.pdf(grid, loc=5.0), rtol=1e-12)

    def test_integral_on_wide_grid(self):
        x = np.random.default_rng(0).normal(size=(500, 1))
        a = ParticleApproximation(x, np.random.default_rng(1).normal(scale=0.3, size=500))
        h = silverman_bandwidth(a)
        grid = np.linspace(x.min() - 5 * h, x.max() + 5 * h, 2001)
        est = kde(a, grid)
        assert 0.98 <= est.integral() <= 1.0 + 1e-9
        assert np.all(est.density >= 0)

    def test_consistency(self):
        a = ParticleApproximation(np.random.default_rng(2).standard_normal((100_000, 1)))
        grid = np.linspace(-4, 4, 161)
        est = kde(a, grid)
        assert np.max(np.abs(est.density - stats.norm.pdf(grid))) < 0.02

    def test_weighted_equals_replicated(self):
        a = ParticleApproximation([[0.0], [1.0]], np.log([0.25, 0.75]))
        b = ParticleApproximation([[0.0], [1.0], [1.0], [1.0]])
        grid = np.linspace(-2, 3, 11)
        np.testing.assert_allclose(kde(a, grid, 0.4).density, kde(b, grid, 0.4).density, rtol=1e-13)

    def test_silverman(self):
        a = ParticleApproximation([[1.0], [3.0]])
        assert silverman_bandwidth(a) == pytest.approx(1.06 * 1.0 * 2 ** (-0.2))

    def test_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            kde(ParticleApproximation([2.0, 2.0]), np.linspace(0, 4, 5))

    @pytest.mark.parametrize("grid", [[0.0, 0.0, 1.0], [1.0, 0.5]])
    def test_grid_must_increase(self, grid):
        with pytest.raises(ConfigurationError):
            kde(ParticleApproximation([0.0, 1.0]), grid, 1.0)


class TestConvergence:
    def test_point_mass_zero_variance(self):
        study = convergence_study(PointMass(), [0.0, 1.0], FilterConfig(8), [4, 8], 3, seed=1)
        np.testing.assert_array_equal(study.variances, 0.0)
        assert math.isnan(study.slope)

    def test_gaussian_mean_sis_rate(self):
        model = GaussianMeanModel(true_mean=0.5)
        ys = list(model.simulate(np.random.default_rng(4), 10))
        counts = 2 ** np.arange(4, 11)
        study = convergence_study(model, ys, FilterConfig(16, "sis"), counts, 50, seed=5)
        assert study.slope == pytest.approx(-1.0, abs=0.2)
        assert study.estimates.shape == (7, 50)

    def test_deterministic(self):
        model = GaussianMeanModel()
        ys = [0.3, -0.1]
        a = convergence_study(model, ys, FilterConfig(16), [8, 16], 4, seed=3)
        b = convergence_study(model, ys, FilterConfig(16), [8, 16], 4, seed=3)
        np.testing.assert_array_equal(a.estimates, b.estimates)
        assert a.slope == b.slope

    def test_needs_repetitions(self):
        with pytest.raises(ConfigurationError):
            convergence_study(GaussianMeanModel(), [0.0], FilterConfig(8), [8], 1)

    def test_slope_of_exact_power_law(self):
        m = np.array([10, 100, 1000])
        assert loglog_slope(m, 3.0 / m) == pytest.approx(-1.0)


class TestDeviationCurve:
    approx = ParticleApproximation(np.random.default_rng(6).normal(9.5, 0.3, size=(1000, 1)))

    def test_zero_epsilon(self):
        assert deviation_probability_curve(self.approx, 9.808, [0.0])[0] == 0.0

    def test_full_support(self):
        x = self.approx.positions[:, 0]
        eps = (x.max() - x.min()) / 9.808 + np.abs(x - 9.808).max() / 9.808
        assert deviation_probability_curve(self.approx, 9.808, [eps])[0] == pytest.approx(1.0)

    def test_nondecreasing(self):
        p = deviation_probability_curve(self.approx, 9.808, np.linspace(0, 0.2, 81))
        assert np.all(np.diff(p) >= 0)


class TestErrorBound:
    @pytest.mark.parametrize("rho, m, expected", [(1.0, 50, 0.08), (2.0, 8, 1.0)])
    def test_values(self, rho, m, expected):
        assert sis_error_bound(rho, m) == pytest.approx(expected)

    @pytest.mark.parametrize("rho, m", [(0.5, 10), (1.0, 0)])
    def test_invalid(self, rho, m):
        with pytest.raises(ConfigurationError):
            sis_error_bound(rho, m)

    def test_empirical_mse_below_bound(self):
        model = GaussianMeanModel(true_mean=0.8)
        ys = list(model.simulate(np.random.default_rng(7), 5))
        state = model
        for y in ys:
            state = state.observe(y)
        mean, var = conjugate_posterior(state)
        exact = quad(lambda m: np.clip(m, -1, 1) * stats.norm.pdf(m, mean, math.sqrt(var)), -10, 10)[0]
        M = 100
        errs = []
        for s in range(500):
            trace = run_filter(model, ys, FilterConfig(M, "sis", seed=s))
            est = trace.final.weights @ np.clip(trace.final.positions[:, 0], -1, 1)
            errs.append((est - exact) ** 2)
        assert np.mean(errs) <= sis_error_bound(rho_t(state), M)


class TestWeakDistance:
    rng = np.random.default_rng(8)
    a = ParticleApproximation(rng.normal(size=300), rng.normal(size=300))
    b = ParticleApproximation(rng.normal(0.3, 1.2, size=400))

    def test_identity(self):
        assert weak_distance(self.a, self.a) == 0.0

    def test_symmetric(self):
        assert weak_distance(self.a, self.b) == weak_distance(self.b, self.a)

    def test_callable_family(self):
        fam = [np.vectorize(lambda x: 0.0, signature="(n)->()"), lambda p: np.cos(p[:, 0])]
        d = weak_distance(self.a, self.b, fam)
        expected = abs(self.a.weights @ np.cos(self.a.positions[:, 0]) - self.b.weights @ np.cos(self.b.positions[:, 0]))
        assert d == pytest.approx(expected)

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            weak_distance(self.a, ParticleApproximation(np.zeros((3, 2))))

    def test_bounded(self):
        assert 0 <= weak_distance(self.a, self.b) <= 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weak_distance_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (ParticleApproximation(rng.normal(rng.normal(), 1.0, size=50), rng.normal(size=50)) for _ in range(3))
    family = TanhFamily.spanning(a, b, c)
    ab = weak_distance(a, b, family)
    bc = weak_distance(b, c, family)
    ac = weak_distance(a, c, family)
    assert ac <= ab + bc + 1e-12


def test_weak_distance_shrinks_with_m():
    model = GaussianMeanModel(true_mean=0.5)
    ys = list(model.simulate(np.random.default_rng(100), 10))
    state = model
    for y in ys:
        state = state.observe(y)
    mean, var = conjugate_posterior(state)
    sd = math.sqrt(var)
    ref = ParticleApproximation(np.random.default_rng(101).normal(mean, sd, (10**6, 1)))
    family = TanhFamily(np.linspace(mean - 4 * sd, mean + 4 * sd, 21))
    ref_integrals = family.integrals(ref)
    votes = 0
    for s in range(20):
        d = [
            np.abs(family.integrals(run_filter(model, ys, FilterConfig(m, seed=s)).final) - ref_integrals).max()
            for m in (100, 1000, 10000)
        ]
        votes += d[0] > d[1] > d[2]
    assert votes > 10
