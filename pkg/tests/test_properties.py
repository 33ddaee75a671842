"""Property-based checks of the particle and filter invariants."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy.special import logsumexp

from sequifilt import (
    FilterConfig,
    ParticleApproximation,
    effective_sample_size,
    integrate,
    resample,
    reweight,
    run_filter,
)
from sequifilt.models import GaussianMeanModel

sizes = st.integers(1, 16)
finite = st.floats(-30, 30, allow_nan=False)


@st.composite
def approximations(draw, max_size=16):
    m = draw(st.integers(1, max_size))
    pos = draw(hnp.arrays(np.float64, (m, 1), elements=st.floats(-100, 100)))
    lw = draw(hnp.arrays(np.float64, m, elements=finite))
    return ParticleApproximation(pos, lw)


@settings(max_examples=100, deadline=None)
@given(approximations(), st.data())
def test_normalized_after_operations(a, data):
    ll = data.draw(hnp.arrays(np.float64, a.size, elements=finite))
    b, _ = reweight(a, ll)
    c = resample(b, np.random.default_rng(data.draw(st.integers(0, 2**32 - 1))))
    for x in (a, b, c):
        assert abs(logsumexp(x.log_weights)) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(approximations())
def test_ess_range(a):
    ess = effective_sample_size(a)
    assert 1 - 1e-9 <= ess <= a.size * (1 + 1e-9)
    # sum W^2 = 1/M + sum (W - 1/M)^2, so ESS = M exactly when weights are uniform
    spread = a.size * np.sum((a.weights - 1.0 / a.size) ** 2)
    assert abs(a.size / ess - 1.0 - spread) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(approximations(), st.data())
def test_reweight_integrate_brute_force(a, data):
    ll = data.draw(hnp.arrays(np.float64, a.size, elements=st.floats(-20, 20)))
    f = data.draw(hnp.arrays(np.float64, a.size, elements=st.floats(-10, 10)))
    b, log_z = reweight(a, ll)
    # extended precision oracle
    w = np.exp(np.asarray(a.log_weights, dtype=np.longdouble)) * np.exp(np.asarray(ll, dtype=np.longdouble))
    expected = np.sum(w * np.asarray(f, dtype=np.longdouble)) / np.sum(w)
    got = integrate(b, lambda p: f)
    assert abs(got - float(expected)) <= 1e-12 * max(1.0, float(np.max(np.abs(f))))
    assert abs(log_z - float(np.log(np.sum(w)))) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(approximations(), finite)
def test_constant_likelihood_leaves_weights(a, c):
    b, log_z = reweight(a, np.full(a.size, c))
    np.testing.assert_allclose(b.log_weights, a.log_weights, atol=1e-10)
    assert abs(log_z - c) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(approximations(), st.floats(-5, 5), st.floats(-5, 5))
def test_integrate_linear(a, alpha, beta):
    def f(p):
        return np.sin(p[:, 0])

    def g(p):
        return p[:, 0] ** 2 / 1e4

    lhs = integrate(a, lambda p: alpha * f(p) + beta * g(p))
    rhs = alpha * integrate(a, f) + beta * integrate(a, g)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(alpha) + abs(beta))


@settings(max_examples=50, deadline=None)
@given(approximations(), st.integers(0, 2**32 - 1))
def test_resample_support(a, seed):
    b = resample(a, np.random.default_rng(seed))
    live = set(a.positions[a.weights > 0, 0])
    assert set(b.positions[:, 0]) <= live
    assert b.size == a.size


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=1, max_size=6),
    st.integers(0, 2**32 - 1),
)
def test_sis_single_batch_equivalence(ys, seed):
    model = GaussianMeanModel()
    cfg = FilterConfig(16, "sis", seed=seed)
    seq = run_filter(model, ys, cfg)
    batch = run_filter(model, [ys], cfg, batched=True)
    np.testing.assert_allclose(seq.final.log_weights, batch.final.log_weights, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_weights_uniform_after_resample(seed, m):
    rng = np.random.default_rng(seed)
    a = ParticleApproximation(rng.normal(size=m), rng.normal(size=m))
    assume(effective_sample_size(a) < m)
    b = resample(a, rng)
    assert np.all(b.log_weights == b.log_weights[0])
