"""Estimate a small stationary tail probability of a 1-d OU chain, step by step.

Each stage of the estimator is run by hand so its output can be inspected,
then the one-call driver is compared with the exact answer and with plain
long-run simulation.

    python3 demos/01_ou1d_walkthrough.py
"""

import warnings

import numpy as np

from rmsplit import (ImportanceFunction, ModelSpec, OptimalPlanInputs, RecurrencySet, RmsConfig,
                     RngStream, SplittingPlan, alpha_batch_means, compare, gamma_oracle,
                     invert_gamma, place_thresholds, rounded_plan, run_mc_gamma, run_mls,
                     run_pilot_fns, run_rms, solve_stationary_covariance)

GAMMA = 1e-4
SEED = 1

model = ModelSpec.ou1d(Q=1.0, h0=0.01)
cov = solve_stationary_covariance(model.Q, model.h0)
u = invert_gamma(cov, GAMMA)
print(f"stationary variance {cov.m11:.6f}; threshold u = {u:.4f} has P(X >= u) = "
      f"{gamma_oracle(cov, u):.3e}")

# Cycles start whenever the chain re-enters the half-line below zero.
A = RecurrencySet.half_space(0.0)
H = ImportanceFunction(u)

alpha = alpha_batch_means(model, A, [0.0], 500_000, rng=RngStream(SEED, (0,)), H=H)
store = alpha.store
print(f"crossing frequency {alpha.value:.5f} (RE {alpha.re:.3f}); "
      f"{len(store)} cycle origins stored, mean cycle length {store.lengths.mean():.1f}")

# A rough pilot gives p_B, the spread of the time spent in B and the level profile.
pilot = run_pilot_fns(model, A, H, 20, 100, store, RngStream(SEED, (1,)))
print(f"pilot: p_B ~ {pilot.p_hat:.2e}, RE(R+) ~ {pilot.re_rplus:.2f}")

opt, factors, sre = rounded_plan(OptimalPlanInputs(pilot.p_hat, pilot.re_rplus, 0.02 ** 2))
levels = place_thresholds(pilot.levels, pilot.cond_probs, opt.m)
plan = SplittingPlan(levels, factors)
print(f"plan: {opt.m} stages, factors {factors}, predicted RE(T_B) {np.sqrt(sre):.3f}")
print("levels:", ", ".join(f"{v:.3f}" for v in levels))

mls = run_mls(model, A, H, plan, store, RngStream(SEED, (2,)))
print(f"one splitting run: p_B = {mls.p_hat:.3e}, T_B = {mls.t_hat:.3e}, "
      f"stage success rates {np.round(mls.cond_probs, 3).tolist()}")
print(f"gamma from this single run: {alpha.value * mls.t_hat:.3e}")

# The driver repeats the last two steps over independent replicas.
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    report = run_rms(model, A, H, RmsConfig(target_re=0.02, n_replicas=10), seed=SEED)
mc = run_mc_gamma(model, H, 50_000_000, seed=SEED)
eff = compare(report, mc)
print(f"driver: gamma = {report.gamma:.4e} (exact {GAMMA:.1e}), per-replica RE "
      f"{report.re_gamma:.3f}")
print(f"plain simulation: gamma = {mc.gamma:.4e}, RE {mc.re:.3f} over {mc.workload:.1e} steps")
print(f"work-normalized efficiency over plain simulation: {eff:.1f}")
