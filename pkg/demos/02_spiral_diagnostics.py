"""How the estimator reports a poorly chosen recurrency set.

For the rotating OU model the cycles that reach far into the tail start
from a different part of the half-plane than typical cycles.  The splitting
estimate then becomes noisy and the origin comparison flags it; the 1-d
model passes both checks.

    python3 demos/02_spiral_diagnostics.py
"""

import warnings

import numpy as np

from rmsplit import (ImportanceFunction, ModelSpec, RecurrencySet, RmsConfig, RngStream,
                     collect_cycles, invert_gamma, quantile_validation, run_rms,
                     solve_stationary_covariance)

GAMMA = 1e-5
A = RecurrencySet.half_space(0.0)
config = RmsConfig(target_re=0.05, n_replicas=10)

for name, model in [("ou1d", ModelSpec.ou1d()), ("spiral theta=3", ModelSpec.ou_spiral(3.0))]:
    u = invert_gamma(solve_stationary_covariance(model.Q, model.h0), GAMMA)
    H = ImportanceFunction(u)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        report = run_rms(model, A, H, config, seed=3)
    store = collect_cycles(model, A, H, np.zeros(model.d), 10_000, RngStream(3, (9,)))
    check = quantile_validation(store, 0.05, RngStream(3, (9, 1)))
    print(f"{name}: gamma = {report.gamma:.3e} (target {GAMMA:g}), "
          f"RE(T_B) = {report.re_t:.3f} vs target {config.target_re}")
    print(f"  origin divergence {check.divergence:.3f}, null threshold {check.threshold:.3f}"
          f" -> {'REJECT' if check.rejected else 'ok'}")
    print(f"  mean origin, all cycles {np.round(check.mean_all, 3).tolist()}, "
          f"top 5% {np.round(check.mean_top, 3).tolist()}")
    for w in caught:
        print("  warning:", w.message)
