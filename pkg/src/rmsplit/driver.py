"""End-to-end estimation of a steady-state probability gamma = alpha_A * T_B.

`run_rms` estimates the crossing frequency alpha_A of the recurrency set
once to build a shared store of cycle origins, runs a pilot, plans the
splitting, then averages N independent replicas of alpha_A^(i) * T_B^(i).
`run_mc_gamma` is the plain long-run-fraction baseline.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .alpha import AlphaEstimate, alpha_batch_means, batch_means
from .errors import ModelInstabilityError
from .planner import OptimalPlanInputs, efficiency_ratio, rounded_plan
from .recurrency import collect_cycles
from .rng import RngStream
from .splitting import (DEFAULT_RPLUS_CAP, DEFAULT_STAGE_BUDGET, SplittingPlan,
                        place_thresholds, run_mls, run_pilot_fns)

__all__ = ["McResult", "RmsConfig", "RmsReport", "compare", "run_mc_gamma", "run_rms",
           "sample_re"]

# stream ids
_STORE, _PILOT, _REPLICA = 0, 1, 2


@dataclass(frozen=True)
class RmsConfig:
    """Run settings; every default is echoed into the report.

    Attributes
    ----------
    target_re : float
        Target relative error of each replica's T_B estimate.
    n_replicas : int
        Number of independent replicas N.
    n_rec : int
        Approximate number of cycles in the shared origin store.
    alpha_crossings : int
        Approximate number of crossings behind each replica's alpha estimate.
    batches : int
        Batch count for batch means.
    warmup : int
        Observed steps discarded at the start of every path.
    pilot_levels, pilot_successes : int
        Pilot thresholds and successes per threshold.
    stage_budget : int
        Step budget of one splitting continuation.
    rplus_cap : int
        Number of time-in-B samples kept per splitting run.
    threads : int
        Worker threads running replicas.
    warn_factor : float
        RE(T_B) above this multiple of the target triggers a warning.
    residual_fraction : float
        Independence residual above this fraction of RE^2(gamma) triggers a warning.
    """

    target_re: float = 2e-2
    n_replicas: int = 20
    n_rec: int = 10_000
    alpha_crossings: int = 100_000
    batches: int = 30
    warmup: int = 10_000
    pilot_levels: int = 20
    pilot_successes: int = 100
    stage_budget: int = DEFAULT_STAGE_BUDGET
    rplus_cap: int = DEFAULT_RPLUS_CAP
    threads: int = 1
    warn_factor: float = 3.0
    residual_fraction: float = 0.5

    def __post_init__(self):
        if not self.target_re > 0:
            raise ValueError("target_re must be positive")
        if self.n_replicas < 2:
            raise ValueError("need at least 2 replicas")
        if min(self.n_rec, self.alpha_crossings, self.threads) < 1:
            raise ValueError("n_rec, alpha_crossings and threads must be positive")
        if self.batches < 2:
            raise ValueError("need at least 2 batches")


def sample_re(values):
    """Relative error of a single replica: sqrt(sum((v_i / mean - 1)^2) / (N - 1))."""
    v = np.asarray(values, dtype=float)
    mean = v.mean()
    if mean == 0:
        return math.nan
    return float(math.sqrt(np.sum((v / mean - 1.0) ** 2) / (len(v) - 1)))


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, float)):
        return None if not math.isfinite(v) else float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class RmsReport:
    """Aggregated result of `run_rms`.

    REs are single-replica sample relative errors; the relative error of the
    mean `gamma` is ``re_gamma / sqrt(n_replicas)``.
    """

    gamma: float
    alpha: float
    t_b: float
    re_gamma: float
    re_alpha: float
    re_t: float
    residual: float
    cond_probs: list
    plan: SplittingPlan
    predicted_sre: float
    replica_gammas: np.ndarray
    replica_alphas: np.ndarray
    replica_ts: np.ndarray
    workload_replica: float
    workload_total: int
    workload_overhead: int
    pooled_alpha: AlphaEstimate | None
    pilot: object
    plan_optimum: object
    config: RmsConfig
    seed: int
    n_rec: int
    efficiency: float | None = None
    warnings: list = field(default_factory=list)

    @property
    def n_replicas(self):
        return len(self.replica_gammas)

    @property
    def ci_halfwidth(self):
        """Three standard errors of the mean `gamma`."""
        return 3.0 * self.re_gamma * self.gamma / math.sqrt(self.n_replicas)

    def to_dict(self):
        out = {
            "gamma": self.gamma, "alpha": self.alpha, "t_b": self.t_b,
            "re_gamma": self.re_gamma, "re_alpha": self.re_alpha, "re_t": self.re_t,
            "independence_residual": self.residual, "cond_probs": self.cond_probs,
            "plan": self.plan.to_dict(), "predicted_sre": self.predicted_sre,
            "plan_optimum": self.plan_optimum.to_dict() if self.plan_optimum else None,
            "pilot": self.pilot.to_dict() if self.pilot else None,
            "pooled_alpha": self.pooled_alpha.to_dict() if self.pooled_alpha else None,
            "replica_gammas": self.replica_gammas, "replica_alphas": self.replica_alphas,
            "replica_ts": self.replica_ts, "workload_replica": self.workload_replica,
            "workload_total": self.workload_total,
            "workload_overhead": self.workload_overhead, "n_rec": self.n_rec,
            "efficiency": self.efficiency, "warnings": list(self.warnings),
            "config": {k: v for k, v in asdict(self.config).items() if k != "threads"},
            "seed": self.seed,
        }
        return _clean(out)


def _plan_from_pilot(pilot, cfg):
    rho = cfg.target_re ** 2
    if pilot.p_hat >= 1.0:
        # every pilot trial succeeded: a single stage straight into B
        n0 = max(1, math.ceil(pilot.re_rplus ** 2 / rho))
        return SplittingPlan((1.0,), (n0, 1), cfg.stage_budget), None, pilot.re_rplus ** 2 / n0
    opt, factors, sre = rounded_plan(OptimalPlanInputs(pilot.p_hat, pilot.re_rplus, rho))
    levels = place_thresholds(pilot.levels, pilot.cond_probs, opt.m)
    return SplittingPlan(levels, factors, cfg.stage_budget), opt, sre


def _replica(model, A, H, plan, store, x0, n_alpha, cfg, seed, i):
    ra = RngStream(seed, (_REPLICA, i, 0))
    start = store.origins[i % len(store)] if x0 is None else x0
    a = alpha_batch_means(model, A, start, n_alpha, cfg.batches, ra, H, cfg.warmup,
                          record_cycles=False)
    rm = RngStream(seed, (_REPLICA, i, 1))
    res = run_mls(model, A, H, plan, store, rm, cfg.rplus_cap)
    return a, res


def run_rms(model, A, H, config=None, seed=0, x0=None, store=None, pilot=None, plan=None):
    """Estimate gamma = P(B) for B = {H >= 1} under the stationary law.

    Parameters
    ----------
    model : ModelSpec
    A : RecurrencySet
    H : ImportanceFunction
    config : RmsConfig, optional
    seed : int
        Global seed; the report is a deterministic function of the inputs.
    x0 : array_like, optional
        Initial state of the alpha paths (default: origin for the store
        path, store origins for the replicas).
    store, pilot, plan : optional
        Precomputed origin store, pilot result or splitting plan to reuse.

    Returns
    -------
    RmsReport
    """
    cfg = config or RmsConfig()
    overhead = 0
    pooled = None
    x_start = np.zeros(model.d) if x0 is None else np.asarray(x0, dtype=float)
    if store is None:
        rs = RngStream(seed, (_STORE,))
        rough = collect_cycles(model, A, H, x_start, min(1000, cfg.n_rec), rs,
                               warmup=cfg.warmup)
        n_steps = math.ceil(1.05 * cfg.n_rec / rough.alpha)
        n_steps += -n_steps % cfg.batches
        pooled = alpha_batch_means(model, A, x_start, n_steps, cfg.batches, rs, H, cfg.warmup)
        store = pooled.store
        alpha_guess = pooled.value
        overhead += rs.workload
    else:
        alpha_guess = store.alpha
    if pilot is None and plan is None:
        rp = RngStream(seed, (_PILOT,))
        pilot = run_pilot_fns(model, A, H, cfg.pilot_levels, cfg.pilot_successes, store, rp,
                              budget=cfg.stage_budget)
        overhead += rp.workload
    opt = None
    if plan is None:
        plan, opt, sre = _plan_from_pilot(pilot, cfg)
    else:
        sre = math.nan
    n_alpha = math.ceil(cfg.alpha_crossings / alpha_guess)
    n_alpha += -n_alpha % cfg.batches

    def job(i):
        return _replica(model, A, H, plan, store, x0, n_alpha, cfg, seed, i)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(job, range(cfg.n_replicas)))
    else:
        results = [job(i) for i in range(cfg.n_replicas)]

    alphas = np.array([a.value for a, _ in results])
    ts = np.array([r.t_hat for _, r in results])
    gammas = alphas * ts
    work = np.array([a.workload + r.workload for a, r in results])
    re_g, re_a, re_t = sample_re(gammas), sample_re(alphas), sample_re(ts)
    residual = abs(re_g ** 2 - re_a ** 2 - re_t ** 2)
    cond = _pooled_cond_probs([r.counts for _, r in results], plan.factors)
    report = RmsReport(
        gamma=float(gammas.mean()), alpha=float(alphas.mean()), t_b=float(ts.mean()),
        re_gamma=re_g, re_alpha=re_a, re_t=re_t, residual=residual, cond_probs=cond,
        plan=plan, predicted_sre=sre, replica_gammas=gammas, replica_alphas=alphas,
        replica_ts=ts, workload_replica=float(work.mean()),
        workload_total=int(work.sum()) + overhead, workload_overhead=overhead,
        pooled_alpha=pooled, pilot=pilot, plan_optimum=opt, config=cfg, seed=seed,
        n_rec=len(store))
    if not re_t <= cfg.warn_factor * cfg.target_re:
        report.warnings.append(
            f"RE(T_B) = {re_t:.3g} exceeds {cfg.warn_factor:g} x target {cfg.target_re:g}; "
            "the recurrency set or importance function may be poorly chosen")
    if not residual <= cfg.residual_fraction * re_g ** 2:
        report.warnings.append(
            f"independence residual {residual:.3g} exceeds {cfg.residual_fraction:g} "
            "x RE^2(gamma); the origin store may not represent cycle origins well")
    for w in report.warnings:
        warnings.warn(w, RuntimeWarning, stacklevel=2)
    return report


def _pooled_cond_probs(all_counts, factors):
    c = np.sum(np.array(all_counts, dtype=float), axis=0)
    out = []
    for k in range(1, len(factors)):
        branch = 1 if k == 1 else factors[k - 1]
        tried = branch * c[k - 1]
        out.append(float(c[k] / tried) if tried > 0 else math.nan)
    return out


@dataclass
class McResult:
    """Long-run fraction of steps in B with its batch-means error."""

    gamma: float
    re: float
    workload: int
    hits: int
    ci: tuple
    batch_values: np.ndarray = field(repr=False)

    def to_dict(self):
        return _clean({"gamma": self.gamma, "re": self.re, "workload": self.workload,
                       "hits": self.hits, "ci": list(self.ci)})


def run_mc_gamma(model, H, N, m=30, seed=0, x0=None, warmup=10_000, rng=None):
    """Fraction of N observed steps (after `warmup`) with H >= 1.

    The relative error comes from `m` batches of ``N // m`` steps.  Warns when
    B is never visited.
    """
    if m < 2 or N < m:
        raise ValueError("need N >= m >= 2")
    rng = rng or RngStream(seed, (3,))
    M = int(N) // m
    x = np.zeros(model.d) if x0 is None else np.array(x0, dtype=float).reshape(model.d)
    w = np.empty(2 * model.d)
    kern = K.pick(K.count_kernel, model.step_fn, H.fn)
    if warmup:
        status, t, coord = kern(model.step_fn, model.params, H.fn, H.params, x, w, warmup,
                                rng.gen, 1, int(warmup), np.empty(1, dtype=np.int64))
        rng.workload += int(t)
        if status == K.NONFINITE:
            raise ModelInstabilityError(int(coord), int(t))
    hits = np.zeros(m, dtype=np.int64)
    status, t, coord = kern(model.step_fn, model.params, H.fn, H.params, x, w, m * M,
                            rng.gen, m, M, hits)
    rng.workload += int(t)
    if status == K.NONFINITE:
        raise ModelInstabilityError(int(coord), warmup + int(t))
    total = int(hits.sum())
    vals = hits / M
    mean, se, ci = batch_means(vals)
    if total == 0:
        warnings.warn(f"no visit to B in {m * M} steps", RuntimeWarning, stacklevel=2)
        return McResult(0.0, math.nan, m * M, 0, (0.0, 0.0), vals)
    return McResult(mean, se / mean, m * M, total, ci, vals)


def compare(report, mc):
    """Work-normalized efficiency of the RMS report over the MC run; stored on the report.

    Uses the per-replica workload and relative error of the report against
    the full workload and relative error of the MC run.
    """
    eff = efficiency_ratio((report.workload_replica, report.re_gamma), (mc.workload, mc.re))
    report.efficiency = eff
    return eff
