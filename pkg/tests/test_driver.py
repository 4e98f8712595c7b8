import json
import math
import warnings

import numpy as np
import pytest

from conftest import TOY_GAMMA
from rmsplit import (ImportanceFunction, ModelSpec, RecurrencySet, RmsConfig, SplittingPlan,
                     compare, gamma_oracle, invert_gamma, run_mc_gamma, run_rms,
                     solve_stationary_covariance)
from rmsplit.driver import _pooled_cond_probs, sample_re

SMALL = RmsConfig(target_re=0.1, n_replicas=6, n_rec=2000, alpha_crossings=4000,
                  pilot_successes=60, warmup=2000)


def _ou1d_setup(gamma):
    model = ModelSpec.ou1d()
    cov = solve_stationary_covariance(model.Q, model.h0)
    return model, RecurrencySet.half_space(0.0), ImportanceFunction(invert_gamma(cov, gamma))


def _quiet(f, *a, **k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return f(*a, **k)


def test_sample_re():
    assert sample_re([1.0, 1.0, 1.0]) == 0.0
    assert sample_re([1.0, 3.0]) == pytest.approx(math.sqrt(0.5))
    assert math.isnan(sample_re([0.0, 0.0]))


def test_pooled_conditional_probabilities():
    counts = [[4, 2, 6, 3], [4, 0, 0, 0]]
    assert _pooled_cond_probs(counts, (4, 3, 2)) == [0.25, 1.0]
    assert math.isnan(_pooled_cond_probs([[4, 0, 0, 0]], (4, 3, 2))[1])


def test_config_validation():
    for bad in [dict(target_re=0), dict(n_replicas=1), dict(n_rec=0), dict(batches=1)]:
        with pytest.raises(ValueError):
            RmsConfig(**bad)


def test_toy_chain_end_to_end(toy):
    model, A, H = toy
    cfg = RmsConfig(target_re=0.05, n_replicas=8, n_rec=2000, alpha_crossings=3000,
                    pilot_successes=100, warmup=100)
    rep = _quiet(run_rms, model, A, H, cfg, seed=3, x0=[0.0])
    se = rep.re_gamma * rep.gamma / math.sqrt(rep.n_replicas)
    assert abs(rep.gamma - TOY_GAMMA) < 4 * se
    assert rep.plan.m == 1


def test_ou1d_small_run():
    model, A, H = _ou1d_setup(1e-2)
    rep = _quiet(run_rms, model, A, H, SMALL, seed=1)
    assert abs(rep.gamma / 1e-2 - 1) < 4 * rep.re_gamma / math.sqrt(rep.n_replicas)
    assert rep.gamma == pytest.approx(np.mean(rep.replica_alphas * rep.replica_ts))
    assert rep.residual == pytest.approx(abs(rep.re_gamma ** 2 - rep.re_alpha ** 2
                                             - rep.re_t ** 2))
    assert rep.plan.levels[-1] == 1.0 and len(rep.cond_probs) == rep.plan.m
    assert rep.workload_total > rep.workload_replica * rep.n_replicas
    assert rep.n_rec >= 2000
    d = rep.to_dict()
    json.dumps(d, allow_nan=False)
    assert "threads" not in d["config"]


def test_report_is_deterministic_and_thread_independent():
    model, A, H = _ou1d_setup(1e-2)
    a = _quiet(run_rms, model, A, H, SMALL, seed=5).to_dict()
    b = _quiet(run_rms, model, A, H, SMALL, seed=5).to_dict()
    from dataclasses import replace
    c = _quiet(run_rms, model, A, H, replace(SMALL, threads=3), seed=5).to_dict()
    assert a == b == c
    d = _quiet(run_rms, model, A, H, SMALL, seed=6).to_dict()
    assert d["gamma"] != a["gamma"]


def test_reuse_of_store_and_plan():
    model, A, H = _ou1d_setup(1e-2)
    first = _quiet(run_rms, model, A, H, SMALL, seed=2)
    plan = SplittingPlan((0.5, 1.0), (200, 3, 2))
    again = _quiet(run_rms, model, A, H, SMALL, seed=2, store=first.pooled_alpha.store,
                   plan=plan)
    assert again.plan == plan and again.workload_overhead == 0
    assert math.isnan(again.predicted_sre)


def test_warning_when_time_in_b_is_noisy():
    model, A, H = _ou1d_setup(1e-2)
    cfg = RmsConfig(target_re=0.1, n_replicas=3, n_rec=2000, alpha_crossings=2000,
                    pilot_successes=40, warmup=2000, warn_factor=1e-6)
    with pytest.warns(RuntimeWarning, match="RE\\(T_B\\)"):
        rep = run_rms(model, A, H, cfg, seed=0)
    assert any("RE(T_B)" in w for w in rep.warnings)


def test_mc_matches_oracle():
    model, _, H = _ou1d_setup(1e-2)
    mc = run_mc_gamma(model, H, 3_000_000, seed=4)
    assert mc.workload == 3_000_000
    assert abs(mc.gamma - 1e-2) < 4 * mc.re * mc.gamma
    assert mc.ci[0] < mc.gamma < mc.ci[1]
    assert mc.hits == pytest.approx(mc.gamma * mc.workload)


def test_mc_on_whole_space_and_empty_set():
    model = ModelSpec.ou1d()
    everything = ImportanceFunction(-1e9, offset=-2e9)
    mc = run_mc_gamma(model, everything, 3000, seed=0)
    assert mc.gamma == 1.0 and mc.re == 0.0
    with pytest.warns(RuntimeWarning):
        none = run_mc_gamma(model, ImportanceFunction(50.0), 3000, seed=0)
    assert none.gamma == 0.0 and math.isnan(none.re)
    json.dumps(none.to_dict(), allow_nan=False)


def test_mc_is_reproducible():
    model, _, H = _ou1d_setup(1e-2)
    a = run_mc_gamma(model, H, 60_000, seed=9)
    b = run_mc_gamma(model, H, 60_000, seed=9)
    np.testing.assert_array_equal(a.batch_values, b.batch_values)


def test_compare_sets_efficiency():
    model, A, H = _ou1d_setup(1e-2)
    rep = _quiet(run_rms, model, A, H, SMALL, seed=1)
    mc = run_mc_gamma(model, H, 300_000, seed=1)
    eff = compare(rep, mc)
    assert rep.efficiency == eff
    assert eff == pytest.approx(mc.workload * mc.re ** 2
                                / (rep.workload_replica * rep.re_gamma ** 2))


def test_gamma_target_consistency():
    model, _, H = _ou1d_setup(1e-3)
    cov = solve_stationary_covariance(model.Q, model.h0)
    assert gamma_oracle(cov, H.u) == pytest.approx(1e-3, rel=1e-12)
