"""Estimators of the frequency of recurrence, the per-step probability of an
inward crossing of the recurrency set under the stationary law."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from .errors import ZeroCrossingsError
from .models import _chunk_len, run_chunk
from .recurrency import ImportanceFunction, _CycleScanner, _warm_up

__all__ = ["AlphaEstimate", "alpha_batch_means", "alpha_exact_mc", "batch_means"]


@dataclass
class AlphaEstimate:
    """Point estimate with its sample relative error.

    Attributes
    ----------
    value : float
        Estimated crossing probability per step.
    re : float
        Sample relative error of `value` (0 when the estimate is 0).
    m, M : int
        Number of batches and batch length (M = 1 pair per "batch" for the
        exact-sampling estimator, which reports m = number of pairs).
    workload : int
        Observed transition steps simulated, warm-up included.
    ci : tuple of float
        Two-sided 95% confidence interval.
    batch_values : ndarray
        Per-batch estimates (batch means only).
    store : OriginStore or None
        Cycles recorded along the way (batch means only).
    """

    value: float
    re: float
    m: int
    M: int
    workload: int
    ci: tuple = (0.0, 0.0)
    batch_values: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    store: object = field(default=None, repr=False)

    @property
    def std_error(self):
        return self.re * self.value

    def to_dict(self):
        return {"value": self.value, "re": self.re, "m": self.m, "M": self.M,
                "workload": self.workload, "ci": list(self.ci)}


def batch_means(values):
    """Mean, standard error and t-based 95% interval of per-batch values."""
    v = np.asarray(values, dtype=float)
    m = len(v)
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(m))
    half = float(stats.t.ppf(0.975, m - 1)) * se
    return mean, se, (mean - half, mean + half)


def alpha_batch_means(model, A, x0, N, m=30, rng=None, H=None, warmup=10_000,
                      record_cycles=True):
    """Batch-means estimate from one path of ``m * (N // m)`` observed steps.

    After `warmup` steps, the path is split into `m` batches of ``N // m``
    steps; a crossing belongs to the batch containing its entry step.  When
    `record_cycles` is set, the completed cycles of the same path are kept
    in ``result.store`` (time in B and max importance use `H`).

    Raises
    ------
    ZeroCrossingsError
        If no batch records a crossing.
    """
    if m < 2:
        raise ValueError("need at least 2 batches")
    if N < m:
        raise ValueError("N must be >= m")
    M = int(N) // m
    n_total = m * M
    H = H if H is not None else ImportanceFunction(np.inf)
    x = np.array(x0, dtype=float).reshape(model.d)
    start_work = rng.workload
    scanner = _CycleScanner(_warm_up(model, A, H, x, warmup, rng), record_cycles)
    counts = np.zeros(m, dtype=np.int64)
    chunk = _chunk_len(model)
    done = 0
    while done < n_total:
        n = min(chunk, n_total - done)
        X, ina, hv = run_chunk(model, A, H, x, n, rng, store=record_cycles,
                               offset=warmup + done)
        idx = scanner.feed(X, ina, hv)
        counts += np.bincount((idx + done) // M, minlength=m)
        done += n
    if counts.sum() == 0:
        raise ZeroCrossingsError(f"no inward crossing in {n_total} steps")
    batch = counts / M
    mean, se, ci = batch_means(batch)
    return AlphaEstimate(mean, se / mean, m, M, rng.workload - start_work, ci, batch,
                         scanner.store() if record_cycles else None)


def alpha_exact_mc(sampler, model, A, M, rng):
    """Fraction of M independent pairs (X_0, X_1) with X_0 outside A and X_1 inside.

    `sampler(rng, n)` must return n i.i.d. draws from the stationary law as
    an (n, d) array.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    X = np.array(sampler(rng, M), dtype=float).reshape(M, model.d)
    in0 = np.empty(M, dtype=np.bool_)
    in1 = np.empty(M, dtype=np.bool_)
    hv = np.empty(M)
    dummy = ImportanceFunction(np.inf)
    member = K.pick(K.membership_kernel, A.fn, dummy.fn)
    member(A.fn, A.params, dummy.fn, dummy.params, X, in0, hv)
    K.pick(K.one_step_kernel, model.step_fn)(model.step_fn, model.params, X,
                                             np.empty(2 * model.d), rng.gen)
    rng.workload += M
    member(A.fn, A.params, dummy.fn, dummy.params, X, in1, hv)
    k = int(np.count_nonzero(~in0 & in1))
    value = k / M
    if k == 0 or M == 1:
        return AlphaEstimate(value, 0.0, M, 1, M, (value, value))
    se = math.sqrt(k * (M - k) / (M * (M - 1.0)) / M)
    return AlphaEstimate(value, se / value, M, 1, M, (value - 1.96 * se, value + 1.96 * se))
