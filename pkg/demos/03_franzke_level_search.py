"""Choosing a recurrency level for the four-variable climate model.

The level l defining A = {x1 <= l} is picked to maximize the number of
inward crossings along a long path; the estimator is then checked against
plain simulation at a threshold the path actually visits.

    python3 demos/03_franzke_level_search.py
"""

import math
import warnings

import numpy as np

from rmsplit import (ImportanceFunction, ModelSpec, RecurrencySet, RmsConfig, RngStream,
                     optimize_recurrency_level, run_mc_gamma, run_rms, sample_path)

model = ModelSpec.franzke()
rng = RngStream(5, (0,))
x = sample_path(model, np.zeros(4), 10_000, rng)[-1]
path = sample_path(model, x, 1_000_000, rng)
x1 = path[:, 0]
print(f"x1: mean {x1.mean():.2f}, sd {x1.std():.2f}, "
      f"99.9% quantile {np.quantile(x1, 0.999):.2f}, max {x1.max():.2f}")

search = optimize_recurrency_level(path, np.round(np.arange(-2.0, 6.01, 0.1), 10))
print(f"most-crossed level {search.level:.1f} with {search.counts.max()} crossings")

level, u = search.level, 9.0
A = RecurrencySet.half_space(level)
H = ImportanceFunction(u, offset=level)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    report = run_rms(model, A, H, RmsConfig(target_re=0.2, n_replicas=6, n_rec=2000,
                                            alpha_crossings=5000), seed=5)
mc = run_mc_gamma(model, H, 5_000_000, seed=5)
se = report.re_gamma * report.gamma / math.sqrt(report.n_replicas)
print(f"P(x1 >= {u}): splitting {report.gamma:.3e} +- {se:.1e}, "
      f"plain simulation {mc.gamma:.3e} +- {mc.re * mc.gamma:.1e}")
