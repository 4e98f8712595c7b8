"""Fixed-splitting multilevel splitting over one recurrency cycle, the
fixed-number-of-successes pilot and threshold placement.

A plan has thresholds 0 = l_0 < l_1 < ... < l_m = 1 and splitting factors
n_0..n_m.  Stage 0 starts one continuation from each of n_0 origins drawn
from an origin store; stage k (1 <= k < m) starts n_k continuations from each
entrance state of level l_k; a continuation succeeds at its first state with
importance >= l_{k+1} and fails at a completed inward crossing of A.  The
final stage runs n_m continuations from every entrance state of B until the
inward crossing and records the time spent in B.

The n_0 origins form n_0 independent one-origin runs that share each stage
loop.  Estimates:

    p_B = r_m / (n_0 n_1 ... n_{m-1}),   T_B = r_{m+1} / (n_0 n_1 ... n_m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import (BudgetExceededError, DegenerateFitError, ModelInstabilityError)

__all__ = [
    "MlsResult",
    "PilotResult",
    "SplittingPlan",
    "mls_estimates",
    "place_thresholds",
    "run_mls",
    "run_pilot_fns",
]

DEFAULT_STAGE_BUDGET = 10**7
DEFAULT_RPLUS_CAP = 100_000


@dataclass(frozen=True)
class SplittingPlan:
    """Thresholds l_1..l_m (with l_m = 1) and splitting factors n_0..n_m."""

    levels: tuple
    factors: tuple
    budget: int = DEFAULT_STAGE_BUDGET

    def __post_init__(self):
        lv = tuple(float(v) for v in self.levels)
        nf = tuple(int(v) for v in self.factors)
        if len(lv) < 1:
            raise ValueError("plan needs at least one level")
        if any(b <= a for a, b in zip((0.0,) + lv, lv)):
            raise ValueError("levels must be strictly increasing and positive")
        if lv[-1] != 1.0:
            raise ValueError("last level must be 1")
        if len(nf) != len(lv) + 1:
            raise ValueError(f"need {len(lv) + 1} splitting factors, got {len(nf)}")
        if any(n < 1 for n in nf) or any(n != v for n, v in zip(nf, self.factors)):
            raise ValueError("splitting factors must be positive integers")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "factors", nf)

    @property
    def m(self):
        return len(self.levels)

    def to_dict(self):
        return {"levels": list(self.levels), "factors": list(self.factors),
                "budget": self.budget}


def mls_estimates(counts, factors):
    """(p_B, T_B) from success counts r_0..r_{m+1} and factors n_0..n_m.

    r_0 is the number of origins and must equal n_0.  Counts may be
    expectations rather than integers.
    """
    r = list(counts)
    n = [int(f) for f in factors]
    m = len(n) - 1
    if len(r) != m + 2:
        raise ValueError("need m + 2 success counts for m + 1 factors")
    denom_p = math.prod(n[:m])
    return r[m] / denom_p, r[m + 1] / (denom_p * n[m])


@dataclass
class MlsResult:
    """Outcome of n_0 pooled one-origin splitting runs.

    Attributes
    ----------
    p_hat, t_hat : float
        Estimates of p_B and T_B.
    counts : list of int
        Success counts r_0..r_{m+1} summed over runs (r_0 = n_0).
    cond_probs : list of float
        Realized r_k / (n_{k-1} r_{k-1}) for k = 1..m (nan once a stage is empty).
    r_plus : ndarray
        Time in B of final-stage continuations, in processing order, capped.
    workload : int
        Observed transition steps simulated.
    run_p, run_t : ndarray
        Per-run estimates; their means are `p_hat` and `t_hat`.
    """

    p_hat: float
    t_hat: float
    counts: list
    cond_probs: list
    r_plus: np.ndarray = field(repr=False)
    workload: int = 0
    run_p: np.ndarray = field(default=None, repr=False)
    run_t: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {"p_hat": self.p_hat, "t_hat": self.t_hat, "counts": list(self.counts),
                "cond_probs": list(self.cond_probs), "workload": self.workload}


def _raise_status(status, info, what):
    if status == K.BUDGET:
        raise BudgetExceededError(f"{what}: a continuation exceeded its step budget")
    if status == K.NONFINITE:
        raise ModelInstabilityError(int(info))


def _stage(model, A, H, states, n_branch, target, final, budget, rng):
    n_in = states.shape[0]
    out_states = np.empty((0 if final else n_in * n_branch, model.d))
    out_parent = np.empty(0 if final else n_in * n_branch, dtype=np.int64)
    out_r = np.zeros(n_in * n_branch if final else 0, dtype=np.int64)
    cont = K.pick(K.continuation, model.step_fn, A.fn, H.fn)
    kern = K.pick(K.stage_kernel, model.step_fn, A.fn, H.fn)
    status, n_out, total, info = kern(
        cont, model.step_fn, model.params, A.fn, A.params, H.fn, H.params,
        np.ascontiguousarray(states), n_branch, float(target), final, budget,
        np.empty(2 * model.d), rng.gen, out_states, out_parent, out_r)
    rng.workload += int(total)
    _raise_status(status, info, "splitting stage")
    return out_states[:n_out], out_parent[:n_out], out_r


def _origins_array(origins):
    return np.atleast_2d(np.asarray(getattr(origins, "origins", origins), dtype=float))


def run_mls(model, A, H, plan, origins, rng, rplus_cap=DEFAULT_RPLUS_CAP):
    """Run n_0 one-origin splitting runs, origins drawn uniformly from `origins`.

    `origins` is an OriginStore or an (N, d) array.  Returns zero estimates
    as soon as a stage produces no success.

    Raises
    ------
    BudgetExceededError
        If one continuation exceeds ``plan.budget`` steps.
    """
    pool = _origins_array(origins)
    n = plan.factors
    m = plan.m
    start = rng.workload
    states = pool[rng.gen.integers(0, len(pool), size=n[0])]
    run_id = np.arange(n[0])
    counts = [n[0]]
    cond = []
    branch = 1  # stage 0 gives each origin a single continuation
    for k in range(m):
        new, parent, _ = _stage(model, A, H, states, branch, plan.levels[k], False,
                                plan.budget, rng)
        cond.append(len(new) / (branch * len(states)))
        counts.append(len(new))
        states, run_id = new, run_id[parent]
        branch = n[k + 1]
        if len(new) == 0:
            cond += [math.nan] * (m - k - 1)
            counts += [0] * (m - k)
            zeros = np.zeros(n[0])
            return MlsResult(0.0, 0.0, counts, cond, np.empty(0, dtype=np.int64),
                             rng.workload - start, zeros, zeros.copy())
    _, _, r = _stage(model, A, H, states, n[m], 1.0, True, plan.budget, rng)
    counts.append(int(r.sum()))
    prod_p = math.prod(n[1:m])
    run_p = np.bincount(run_id, minlength=n[0]) / prod_p
    run_t = np.bincount(run_id, weights=r.reshape(-1, n[m]).sum(1),
                        minlength=n[0]) / (prod_p * n[m])
    p_hat, t_hat = mls_estimates(counts, n)
    return MlsResult(p_hat, t_hat, counts, cond, r[:rplus_cap].copy(),
                     rng.workload - start, run_p, run_t)


@dataclass
class PilotResult:
    """Rough estimates from a fixed-number-of-successes pilot.

    `levels` are the pilot thresholds j / m_pilot and `cond_probs` the
    unbiased per-level estimates (k_s - 1) / (trials - 1).
    """

    p_hat: float
    t_hat: float
    re_rplus: float
    mean_rplus: float
    levels: np.ndarray
    cond_probs: np.ndarray
    trials: np.ndarray
    workload: int

    def to_dict(self):
        return {"p_hat": self.p_hat, "t_hat": self.t_hat, "re_rplus": self.re_rplus,
                "mean_rplus": self.mean_rplus, "levels": self.levels.tolist(),
                "cond_probs": self.cond_probs.tolist(), "trials": self.trials.tolist(),
                "workload": self.workload}


def run_pilot_fns(model, A, H, m_pilot, k_s, origins, rng,
                  budget=DEFAULT_STAGE_BUDGET, max_trials=10**9):
    """Fixed-number-of-successes pilot over `m_pilot` equally spaced levels.

    At each level, continuations restart from uniform picks among the
    previous level's successes (the origins for the first level) until
    `k_s` of them reach the level.  Afterwards one final-stage continuation
    is run from each of the `k_s` entrance states of B to sample R_+.
    """
    if m_pilot < 2:
        raise ValueError("m_pilot must be >= 2")
    if k_s < 2:
        raise ValueError("k_s must be >= 2")
    pool = _origins_array(origins)
    start = rng.workload
    levels = np.arange(1, m_pilot + 1) / m_pilot
    probs = np.empty(m_pilot)
    trials = np.empty(m_pilot, dtype=np.int64)
    cont = K.pick(K.continuation, model.step_fn, A.fn, H.fn)
    kern = K.pick(K.fns_kernel, model.step_fn, A.fn, H.fn)
    w = np.empty(2 * model.d)
    for j, lv in enumerate(levels):
        out = np.empty((k_s, model.d))
        status, t, total, info = kern(cont, model.step_fn, model.params, A.fn, A.params,
                                      H.fn, H.params, np.ascontiguousarray(pool), k_s,
                                      float(lv), budget, max_trials, w, rng.gen, out)
        rng.workload += int(total)
        if status == K.NOSUCCESS:
            raise BudgetExceededError(
                f"pilot level {lv:g}: fewer than {k_s} successes in {max_trials} trials")
        _raise_status(status, info, "pilot")
        trials[j] = t
        probs[j] = (k_s - 1) / (t - 1)
        pool = out
    _, _, r = _stage(model, A, H, pool, 1, 1.0, True, budget, rng)
    mean_r = float(r.mean())
    re_r = float(r.std(ddof=1) / mean_r)
    p_hat = float(np.prod(probs))
    return PilotResult(p_hat, p_hat * mean_r, re_r, mean_r, levels, probs, trials,
                       rng.workload - start)


def place_thresholds(pilot_levels, pilot_probs, m):
    """Thresholds l_1..l_m splitting the fitted log-probability into equal parts.

    The cumulative log-probability log P(H reaches l) is interpolated
    linearly between (0, 0) and the pilot points.  Level l_k is where it
    equals k/m times its value at 1, so each stage has the same fitted
    conditional probability; l_m = 1.

    Raises
    ------
    DegenerateFitError
        If a pilot probability is not in (0, 1] or the fit never decreases.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    lv = np.asarray(pilot_levels, dtype=float)
    pr = np.asarray(pilot_probs, dtype=float)
    if len(lv) != len(pr) or len(lv) < 1:
        raise ValueError("pilot levels and probabilities must match")
    if np.any(np.diff(lv) <= 0) or lv[0] <= 0 or lv[-1] != 1.0:
        raise ValueError("pilot levels must increase strictly from above 0 to 1")
    if m == 1:
        return (1.0,)
    if len(lv) < 2:
        raise DegenerateFitError("need pilot estimates at >= 2 levels")
    if np.any(~(pr > 0)) or np.any(pr > 1):
        raise DegenerateFitError("pilot probabilities must lie in (0, 1]")
    x = np.concatenate(([0.0], lv))
    y = np.concatenate(([0.0], np.cumsum(np.log(pr))))
    if not y[-1] < 0:
        raise DegenerateFitError("fitted log-probability does not decrease")
    out = []
    for k in range(1, m):
        t = k / m * y[-1]
        i = int(np.argmax(y <= t))  # first point at or below the target
        x0, x1, y0, y1 = x[i - 1], x[i], y[i - 1], y[i]
        out.append(float(x0 + (t - y0) / (y1 - y0) * (x1 - x0)))
    out.append(1.0)
    if any(b <= a for a, b in zip(out, out[1:])):
        raise DegenerateFitError("interpolated levels are not strictly increasing")
    return tuple(out)
