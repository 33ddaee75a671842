"""
Monte Carlo rate of the posterior mean
======================================

The variance of the final posterior-mean estimate across independent runs
should fall like ``1 / M`` for both filters.
"""

from dataclasses import replace

from sequifilt import convergence_study, parse_measurements
from sequifilt.cli import bundled_config, load_config

cfg = load_config(bundled_config())
observations = parse_measurements(cfg.data).observations()
counts = cfg.convergence["particle_counts"]

for algorithm in ("sis", "smc"):
    study = convergence_study(
        cfg.model, observations, replace(cfg.filter, algorithm=algorithm), counts, cfg.convergence["repetitions"]
    )
    print(f"{algorithm.upper()}: slope {study.slope:.3f}")
    for m, mu, var in zip(study.particle_counts, study.means, study.variances):
        print(f"  M={m:5d} mean={mu:.4f} var={var:.2e}")
