"""
Checking the filters against an exact posterior
===============================================

With data ``y ~ N(m, 1)`` and prior ``m ~ N(0, 1)`` the posterior after
``t`` observations is ``N(S_t / (t + 1), 1 / (t + 1))``.  The same model
gives the effective sample size of plain importance sampling in closed
form, ``M / rho_t``.
"""

import numpy as np

from sequifilt import FilterConfig, run_filter
from sequifilt.models import GaussianMeanModel, conjugate_posterior, rho_t

model = GaussianMeanModel(true_mean=1.0)
ys = model.simulate(np.random.default_rng(4), 20)

# %%
# SIS with 10^5 particles: compare the posterior mean and the ESS.

M = 100_000
trace = run_filter(model, list(ys), FilterConfig(M, "sis", seed=4))
state = model
print(" t   filter mean  exact mean   M/ESS    rho_t")
for y, rec in zip(ys, trace.records):
    state = state.observe(y)
    exact_mean, _ = conjugate_posterior(state)
    print(f"{rec.t:2d} {rec.post_mean[0]:12.5f} {exact_mean:11.5f} {M / rec.ess:8.3f} {rho_t(state):8.3f}")

# %%
# SMC keeps the particle cloud healthy: after each resampling the ESS is
# back at M.

trace = run_filter(model, list(ys), FilterConfig(10_000, "smc", seed=4))
print("SMC resampled at steps", [r.t for r in trace.records if r.resampled])
print("SMC final mean", trace.records[-1].post_mean[0], "exact", conjugate_posterior(state)[0])
