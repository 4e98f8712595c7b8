"""Exact stationary quantities of the Euler-discretized OU chain.

For X_{n+1} = F X_n + sqrt(h) Z_n with F = I - Q h, the stationary law is
N(0, M) where M solves the discrete Lyapunov equation M = F M F^T + h I.
The steady-state probability of B = {x_1 >= u} is then Phi(-u / sqrt(M_11)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import ndtr, ndtri

from .errors import UnstableSystemError

__all__ = [
    "StationaryCovariance",
    "gamma_oracle",
    "invert_gamma",
    "lyapunov_residual",
    "solve_stationary_covariance",
    "stationary_sampler",
]

_KRON_MAX_D = 50


@dataclass(frozen=True, eq=False)
class StationaryCovariance:
    """Stationary covariance M of the discretized OU chain, with its inputs."""

    M: np.ndarray
    Q: np.ndarray
    h: float

    @property
    def m11(self):
        return float(self.M[0, 0])

    @property
    def residual(self):
        return lyapunov_residual(self.M, self.Q, self.h)


def lyapunov_residual(M, Q, h):
    """Frobenius norm of M - F M F^T - h I, with F = I - Q h."""
    F = np.eye(len(M)) - np.asarray(Q) * h
    return float(np.linalg.norm(M - F @ M @ F.T - h * np.eye(len(M))))


def solve_stationary_covariance(Q, h):
    """Solve M = (I - Q h) M (I - Q h)^T + h I.

    Uses the vectorized system (I - F kron F) vec(M) = h vec(I) for
    d <= 50 and scipy's discrete Lyapunov solver beyond that.

    Raises
    ------
    UnstableSystemError
        If the spectral radius of I - Q h is >= 1.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    d = Q.shape[0]
    if Q.shape != (d, d):
        raise ValueError("Q must be square")
    F = np.eye(d) - Q * h
    rho = float(np.max(np.abs(np.linalg.eigvals(F))))
    if rho >= 1.0:
        raise UnstableSystemError(f"spectral radius of I - Qh is {rho:.6g} >= 1")
    if d <= _KRON_MAX_D:
        A = np.eye(d * d) - np.kron(F, F)
        M = np.linalg.solve(A, h * np.eye(d).ravel()).reshape(d, d)
    else:
        M = linalg.solve_discrete_lyapunov(F, h * np.eye(d))
    M = 0.5 * (M + M.T)
    return StationaryCovariance(M, Q, float(h))


def _m11(M):
    if isinstance(M, StationaryCovariance):
        return M.m11
    return float(np.atleast_2d(M)[0, 0])


def gamma_oracle(M, u):
    """Stationary probability that the first coordinate is >= u."""
    v = _m11(M)
    if not v > 0:
        raise ValueError("M_11 must be positive")
    return float(ndtr(-u / np.sqrt(v)))


def invert_gamma(M, gamma):
    """Threshold u with gamma_oracle(M, u) == gamma."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    return float(-np.sqrt(_m11(M)) * ndtri(gamma))


def stationary_sampler(M):
    """Exact sampler ``f(rng, n) -> (n, d)`` from N(0, M)."""
    cov = M.M if isinstance(M, StationaryCovariance) else np.atleast_2d(M)
    L = np.linalg.cholesky(cov)

    def sample(rng, n):
        return rng.gen.standard_normal((int(n), L.shape[0])) @ L.T

    return sample
