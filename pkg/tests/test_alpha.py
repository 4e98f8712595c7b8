import math

import numpy as np
import pytest

from conftest import TOY_ALPHA, exact_alpha
from rmsplit import (ModelSpec, RecurrencySet, RngStream, ZeroCrossingsError, alpha_batch_means,
                     alpha_exact_mc, solve_stationary_covariance, stationary_sampler)
from rmsplit.alpha import batch_means


def ou1d_alpha(h=0.01):
    # X_0 ~ N(0, M), X_1 = (1 - h) X_0 + sqrt(h) Z has correlation 1 - h with X_0;
    # the orthant probability P(X_0 > 0, X_1 <= 0) is arccos(1 - h) / (2 pi)
    return math.acos(1 - h) / (2 * math.pi)


def test_oracles_agree():
    assert exact_alpha() == pytest.approx(TOY_ALPHA, abs=1e-14)
    assert ou1d_alpha() == pytest.approx(0.022527, abs=1e-6)


def test_batch_means_helper():
    mean, se, (lo, hi) = batch_means([1.0, 2.0, 3.0])
    assert mean == 2.0 and se == pytest.approx(1 / math.sqrt(3))
    assert hi - mean == pytest.approx(4.302652729911275 * se, rel=1e-9)
    assert mean - lo == pytest.approx(hi - mean)


def test_exact_sampling_estimator():
    model = ModelSpec.ou1d()
    A = RecurrencySet.half_space(0.0)
    sampler = stationary_sampler(solve_stationary_covariance(model.Q, model.h0))
    est = alpha_exact_mc(sampler, model, A, 1_000_000, RngStream(3))
    se = est.std_error
    assert abs(est.value - ou1d_alpha()) < 3 * se
    assert se == pytest.approx(math.sqrt(ou1d_alpha() * (1 - ou1d_alpha()) / 1e6), rel=0.05)
    assert est.workload == 1_000_000


def test_exact_sampling_degenerate_cases():
    model = ModelSpec.ou1d()
    sampler = stationary_sampler(np.array([[1 / 1.99]]))
    none = alpha_exact_mc(sampler, model, RecurrencySet.empty(), 1000, RngStream(0))
    assert none.value == 0.0 and none.re == 0.0
    one = alpha_exact_mc(sampler, model, RecurrencySet.half_space(0.0), 1, RngStream(0))
    assert one.re == 0.0
    with pytest.raises(ValueError):
        alpha_exact_mc(sampler, model, RecurrencySet.empty(), 0, RngStream(0))


def test_batch_means_ou1d():
    model = ModelSpec.ou1d()
    est = alpha_batch_means(model, RecurrencySet.half_space(0.0), [0.0], 3_000_000,
                            rng=RngStream(4))
    assert est.m == 30 and est.M == 100_000
    assert abs(est.value - ou1d_alpha()) < 4 * est.std_error
    assert est.ci[0] < est.value < est.ci[1]
    assert est.workload == 10_000 + 3_000_000
    # every crossing lands in exactly one batch
    assert est.batch_values.sum() * est.M == pytest.approx(len(est.store) + 1, abs=1)


def test_batch_means_toy(toy):
    model, A, _ = toy
    est = alpha_batch_means(model, A, [0.0], 90_000, rng=RngStream(5), warmup=100)
    assert abs(est.value - TOY_ALPHA) < 4 * est.std_error


def test_store_matches_path_frequency():
    model = ModelSpec.ou1d()
    est = alpha_batch_means(model, RecurrencySet.half_space(0.0), [0.0], 600_000,
                            rng=RngStream(6))
    assert est.store.alpha == pytest.approx(est.value, rel=0.02)


def test_zero_crossings():
    with pytest.raises(ZeroCrossingsError):
        alpha_batch_means(ModelSpec.ou1d(), RecurrencySet.empty(), [0.0], 3000,
                          rng=RngStream(0), warmup=0)
    with pytest.raises(ValueError):
        alpha_batch_means(ModelSpec.ou1d(), RecurrencySet.empty(), [0.0], 10, m=30,
                          rng=RngStream(0))
