"""Optimal splitting parameters and workload accounting.

With unit cost per continuation, the plan minimizing total work subject to
RE^2(T_B) <= rho for a rough p_B and a rough relative spread RE(R_+) of
the time in B is

    m   = c |log p_B|
    p_k = p_opt = (2c - 1) / (2c)            (equal per-stage probability)
    n_k = 1 / p_opt                          (1 <= k <= m - 1)
    n_m = RE(R_+) 2c / sqrt(2c - 1)
    n_0 = (c |log p_B| / sqrt(2c - 1) + RE(R_+)) / (rho sqrt(2c - 1))
    W   = (c |log p_B| / sqrt(2c - 1) + RE(R_+))^2 / rho

where c solves exp(1/c) = 2c / (2c - 1) on (1/2, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import optimize

__all__ = [
    "OptimalPlanInputs",
    "OptimalPlanOutputs",
    "efficiency_ratio",
    "mc_workload",
    "optimal_plan",
    "predicted_sre",
    "rounded_plan",
    "solve_c",
]


def solve_c():
    """Root of exp(1/c) = 2c / (2c - 1) in (1/2, 1)."""
    f = lambda c: math.exp(1.0 / c) - 2.0 * c / (2.0 * c - 1.0)  # noqa: E731
    return optimize.brentq(f, 0.55, 1.0, xtol=1e-15, maxiter=200)


C = solve_c()
P_OPT = (2 * C - 1) / (2 * C)


@dataclass(frozen=True)
class OptimalPlanInputs:
    p_b: float
    re_rplus: float
    rho: float

    def __post_init__(self):
        if not 0 < self.p_b < 1:
            raise ValueError("p_B must lie in (0, 1)")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.re_rplus >= 0:
            raise ValueError("RE(R_+) must be >= 0")


@dataclass(frozen=True)
class OptimalPlanOutputs:
    """Real-valued optimum and its rounded integer version.

    `factors` holds the rounded n_0..n_m and `m` the rounded stage count;
    the ``*_real`` fields keep the unrounded values.
    """

    c: float
    p_opt: float
    m_real: float
    n0_real: float
    nk_real: float
    nm_real: float
    workload: float
    m: int
    factors: tuple

    def to_dict(self):
        return {"c": self.c, "p_opt": self.p_opt, "m_real": self.m_real,
                "n0_real": self.n0_real, "nk_real": self.nk_real, "nm_real": self.nm_real,
                "workload": self.workload, "m": self.m, "factors": list(self.factors)}


def _round(v):
    return max(1, int(math.floor(v + 0.5)))


def _stage_cost(m, L):
    # m sqrt(p_B^{-1/m} - 1): the part of the workload that depends on m
    return m * math.sqrt(math.expm1(L / m))


def optimal_plan(inputs):
    """Optimal parameters for `inputs`, rounded to integers (>= 1).

    Splitting factors are rounded to the nearest integer.  The stage count
    is whichever neighbour of the real optimum has the smaller workload
    with equal stage probabilities; this is the nearest integer except when
    the real optimum is small and the workload curve is lopsided.
    """
    c = C
    s = math.sqrt(2 * c - 1)
    L = abs(math.log(inputs.p_b))
    re = inputs.re_rplus
    m_real = c * L
    n0 = (c * L / s + re) / (inputs.rho * s)
    nk = 1.0 / P_OPT
    nm = re * 2 * c / s
    W = (c * L / s + re) ** 2 / inputs.rho
    m = min({max(1, math.floor(m_real)), math.ceil(m_real)}, key=lambda k: _stage_cost(k, L))
    factors = (_round(n0),) + (_round(nk),) * (m - 1) + (_round(nm),)
    return OptimalPlanOutputs(c, P_OPT, m_real, n0, nk, nm, W, m, factors)


def predicted_sre(factors, probs, re_rplus):
    """Predicted RE^2(T_B) for splitting factors n_0..n_m and stage probabilities p_1..p_m.

    Sum over k of ((1 - p_k) / p_k) / prod_{j<k} n_j p_j plus
    RE^2(R_+) / prod_{j<=m} n_j p_j, with p_0 = 1.
    """
    n = [float(v) for v in factors]
    p = [float(v) for v in probs]
    m = len(p)
    if len(n) != m + 1:
        raise ValueError("need m + 1 factors for m probabilities")
    pp = [1.0] + p
    total = 0.0
    growth = 1.0  # prod_{j<k} n_j p_j
    for k in range(1, m + 1):
        growth *= n[k - 1] * pp[k - 1]
        total += (1 - p[k - 1]) / p[k - 1] / growth
    growth *= n[m] * pp[m]
    return total + re_rplus ** 2 / growth


def rounded_plan(inputs, tol=1.2):
    """Rounded optimum with n_0 raised when rounding inflates the predicted RE^2.

    Stage probabilities are taken as p_B^{1/m} for the rounded m.  If the
    predicted RE^2 exceeds `tol` * rho, n_0 is scaled up to meet rho.
    Returns ``(outputs, factors, predicted RE^2)``.
    """
    out = optimal_plan(inputs)
    probs = [inputs.p_b ** (1.0 / out.m)] * out.m
    factors = list(out.factors)
    sre = predicted_sre(factors, probs, inputs.re_rplus)
    if sre > tol * inputs.rho:
        factors[0] = math.ceil(factors[0] * sre / inputs.rho)
        sre = predicted_sre(factors, probs, inputs.re_rplus)
    return out, tuple(factors), sre


def mc_workload(p_b, re_rplus, rho):
    """Cycles needed by plain simulation of cycles to reach RE^2(T_B) = rho."""
    if not 0 < p_b < 1:
        raise ValueError("p_B must lie in (0, 1)")
    if not rho > 0:
        raise ValueError("rho must be positive")
    return (1.0 - p_b + re_rplus ** 2) / (p_b * rho)


def efficiency_ratio(rms, mc):
    """(W_MC RE_MC^2) / (W_RMS RE_RMS^2) for (workload, RE) pairs."""
    w_r, re_r = rms
    w_m, re_m = mc
    if min(w_r, re_r, w_m, re_m) <= 0:
        raise ValueError("workloads and relative errors must be positive")
    return (w_m * re_m ** 2) / (w_r * re_r ** 2)
