"""Acceptance criteria 1-9, each printing one PASS/FAIL line.

The statistical criteria are sized for a single desktop core: the whole
module takes roughly fifteen minutes.
"""

import itertools
import json
import math
import warnings

import numpy as np
import pytest
import yaml

from conftest import TOY_PB, TOY_TB, enumerate_tree, expected_time_in_b, record_criterion
from rmsplit import (ImportanceFunction, ModelSpec, OptimalPlanInputs, RecurrencySet, RmsConfig,
                     RngStream, alpha_batch_means, collect_cycles, efficiency_ratio,
                     invert_gamma, mls_estimates, optimal_plan, predicted_sre,
                     quantile_validation, run_mc_gamma, run_rms, solve_c,
                     solve_stationary_covariance)
from rmsplit import planner
from rmsplit.cli import main
from rmsplit.models import random_real_spectrum_drift, spiral_drift

pytestmark = pytest.mark.slow

SEED = 2019
TARGET_RE = 2e-2
OU1D_GAMMAS = (1e-3, 1e-4)


def _u_for(model, gamma):
    return invert_gamma(solve_stationary_covariance(model.Q, model.h0), gamma)


def _quiet(f, *a, **k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return f(*a, **k)


# ---- shared runs --------------------------------------------------------------

def _desk_config(out_dir):
    return {
        "seed": SEED,
        "model": {"kind": "ou1d", "h0": 0.01, "Q": 1.0},
        "recurrency": {"kind": "half-space", "level": 0.0, "gamma": list(OU1D_GAMMAS)},
        "estimation": {"target_re": TARGET_RE, "replicas": 20},
        "output": {"dir": str(out_dir), "format": ["json", "csv"]},
    }


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    """Two CLI runs of the ou1d desk-scale experiment with the same seed."""
    base = tmp_path_factory.mktemp("desk")
    outs = []
    for name in ("first", "second"):
        cfg = base / f"{name}.yaml"
        cfg.write_text(yaml.safe_dump(_desk_config(base / name)))
        assert main(["estimate", "--config", str(cfg), "--threads", "1"]) == 0
        outs.append(base / name)
    report = json.loads((outs[0] / "estimate.json").read_text())
    return report, outs


# ---- criterion 1 --------------------------------------------------------------

def test_criterion_1_oracle_exactness():
    h = 0.01
    scalar = solve_stationary_covariance([[1.0]], h)
    rel = abs(scalar.m11 * (2 - h) - 1)
    spiral = solve_stationary_covariance(spiral_drift(3.0), h).residual
    ten = solve_stationary_covariance(random_real_spectrum_drift(d=10), h).residual
    ok = rel < 1e-12 and spiral < 1e-10 and ten < 1e-10
    assert record_criterion(1, ok, f"M11 rel err {rel:.1e}, residuals spiral {spiral:.1e}, "
                                   f"10-d {ten:.1e}")


# ---- criterion 2 --------------------------------------------------------------

def test_criterion_2_ou1d_desk_scale(desk_runs):
    report, _ = desk_runs
    parts, ok = [], True
    for res in report["results"]:
        g, target = res["gamma"], res["gamma_target"]
        dev = abs(g / target - 1)
        good = dev < 3 * res["re_gamma"] and TARGET_RE / 2 <= res["re_t"] <= 2 * TARGET_RE
        ok &= good
        parts.append(f"gamma {target:g}: dev {dev:.4f} vs 3RE {3 * res['re_gamma']:.4f}, "
                     f"RE(T_B) {res['re_t']:.4f}")
    assert record_criterion(2, ok, "; ".join(parts))


# ---- criterion 3 --------------------------------------------------------------

def test_criterion_3_alpha():
    model = ModelSpec.ou1d()
    est = alpha_batch_means(model, RecurrencySet.half_space(0.0), [0.0], 10_000_000,
                            rng=RngStream(SEED, (3,)))
    mean_len = float(est.store.lengths.mean())
    close = abs(est.value / 0.0225 - 1) < 0.05
    identity = abs(mean_len * est.value - 1) < 3 * est.re
    assert record_criterion(3, close and identity,
                            f"alpha {est.value:.5f} (RE {est.re:.4f}), mean cycle length "
                            f"{mean_len:.2f} vs 1/alpha {1 / est.value:.2f}")


# ---- criterion 4 --------------------------------------------------------------

def test_criterion_4_enumeration():
    worst = 0.0
    cases = 0
    for levels in [(1.0,), (0.5, 1.0), (0.75, 1.0)]:
        m = len(levels)
        for factors in itertools.product((1, 2, 3), repeat=m + 1):
            ep = et = 0.0
            for p, counts, states in enumerate_tree(levels, factors):
                r_last = factors[-1] * sum(expected_time_in_b(s) for s in states)
                pk, tk = mls_estimates(list(counts) + [r_last], factors)
                ep += p * pk
                et += p * tk
            worst = max(worst, abs(ep - TOY_PB), abs(et - TOY_TB))
            cases += 1
    assert record_criterion(4, worst < 1e-12, f"{cases} plans, max |E - exact| = {worst:.1e}")


# ---- criterion 5 --------------------------------------------------------------

def test_criterion_5_planner_constants():
    c = solve_c()
    p_opt = (2 * c - 1) / (2 * c)
    m = 7
    rho = 2.5e-5
    out = optimal_plan(OptimalPlanInputs(planner.P_OPT ** m, 1.0, rho))
    factors = [out.n0_real] + [out.nk_real] * (m - 1) + [out.nm_real]
    sre = predicted_sre(factors, [p_opt] * m, 1.0)
    balance = abs(out.nk_real * p_opt - 1)  # n_k p_{k+1} - 1, the same for every k
    ok = (abs(c - 0.6275) <= 5e-5 and abs(p_opt - 0.2032) <= 5e-5
          and abs(sre / rho - 1) < 1e-12 and balance < 1e-12)
    assert record_criterion(5, ok, f"c {c:.6f}, p_opt {p_opt:.6f}, "
                                   f"RE^2/rho - 1 = {sre / rho - 1:.1e}, balance {balance:.1e}")


# ---- criterion 6 --------------------------------------------------------------

MC_STEPS = {1e-3: 100_000_000, 1e-4: 100_000_000, 1e-5: 1_000_000_000}


def test_criterion_6_efficiency(desk_runs):
    report, _ = desk_runs
    model = ModelSpec.ou1d()
    A = RecurrencySet.half_space(0.0)
    rms = {r["gamma_target"]: (r["workload_replica"], r["re_gamma"]) for r in report["results"]}
    H5 = ImportanceFunction(_u_for(model, 1e-5))
    rep5 = _quiet(run_rms, model, A, H5, RmsConfig(target_re=TARGET_RE), seed=SEED)
    rms[1e-5] = (rep5.workload_replica, rep5.re_gamma)
    effs = []
    for i, g in enumerate((1e-3, 1e-4, 1e-5)):
        mc = run_mc_gamma(model, ImportanceFunction(_u_for(model, g)), MC_STEPS[g],
                          rng=RngStream(SEED, (6, i)))
        effs.append(efficiency_ratio(rms[g], (mc.workload, mc.re)))
    ok = effs[2] > 5 and effs[0] < effs[1] < effs[2]
    assert record_criterion(6, ok, "Eff at 1e-3, 1e-4, 1e-5: "
                                   + ", ".join(f"{e:.1f}" for e in effs))


# ---- criterion 7 --------------------------------------------------------------

def _validation(model, u):
    A = RecurrencySet.half_space(0.0)
    store = collect_cycles(model, A, ImportanceFunction(u), np.zeros(model.d), 10_000,
                           RngStream(SEED, (7,)))
    return quantile_validation(store, 0.05, RngStream(SEED, (7, 1)))


def test_criterion_7_assumption_violation(desk_runs):
    report, _ = desk_runs
    spiral = ModelSpec.ou_spiral(3.0)
    u_s = _u_for(spiral, 1e-6)
    rep = _quiet(run_rms, spiral, RecurrencySet.half_space(0.0), ImportanceFunction(u_s),
                 RmsConfig(target_re=TARGET_RE), seed=SEED)
    qv_s = _validation(spiral, u_s)
    ou = ModelSpec.ou1d()
    ou_res = next(r for r in report["results"] if r["gamma_target"] == 1e-4)
    qv_o = _validation(ou, _u_for(ou, 1e-4))
    spiral_flags = rep.re_t > 2 * TARGET_RE and qv_s.rejected
    ou_quiet = ou_res["re_t"] <= 2 * TARGET_RE and not qv_o.rejected
    assert record_criterion(
        7, spiral_flags and ou_quiet,
        f"spiral RE(T_B) {rep.re_t:.4f}, divergence {qv_s.divergence:.3f} vs "
        f"{qv_s.threshold:.3f}; ou1d RE(T_B) {ou_res['re_t']:.4f}, divergence "
        f"{qv_o.divergence:.3f} vs {qv_o.threshold:.3f}")


# ---- criterion 8 --------------------------------------------------------------

FRANZKE_REFERENCE = 1.08e-3


def test_criterion_8_franzke():
    model = ModelSpec.franzke()
    level, u = 7.9, 14.0
    A = RecurrencySet.half_space(level)
    H = ImportanceFunction(u, offset=level)
    cfg = RmsConfig(target_re=0.1, n_replicas=10, n_rec=2000, alpha_crossings=5000)
    rep = _quiet(run_rms, model, A, H, cfg, seed=SEED)
    se_r = rep.re_gamma * rep.gamma / math.sqrt(rep.n_replicas)
    mc = _quiet(run_mc_gamma, model, H, 30_000_000, rng=RngStream(SEED, (8,)))
    se_m = mc.re * mc.gamma if mc.hits else math.nan
    band = 3 * math.sqrt(se_r ** 2 + se_m ** 2)
    agree = abs(rep.gamma - mc.gamma) < band
    near = (abs(rep.gamma - FRANZKE_REFERENCE) < 3 * se_r
            and abs(mc.gamma - FRANZKE_REFERENCE) < 3 * se_m)
    assert record_criterion(
        8, agree and near,
        f"RMS {rep.gamma:.3e} (se {se_r:.1e}), MC {mc.gamma:.3e} ({mc.hits} hits in "
        f"{mc.workload} steps), reference {FRANZKE_REFERENCE:g}")


# ---- criterion 9 --------------------------------------------------------------

def test_criterion_9_determinism(desk_runs):
    _, (first, second) = desk_runs
    a = (first / "estimate.csv").read_bytes()
    b = (second / "estimate.csv").read_bytes()
    assert record_criterion(9, a == b, f"estimate.csv {len(a)} bytes, identical: {a == b}")
