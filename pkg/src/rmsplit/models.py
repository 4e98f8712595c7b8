"""Discrete-time Markov chains: Euler-discretized SDE models and custom kernels.

Built-in kinds
--------------
``ou1d`` / ``ou``
    X_{n+1} = (I - Q h0) X_n + sqrt(h0) Z_n with Z_n standard normal, which is
    the explicit Euler scheme for dX = -Q X dt + dW.
``ou-spiral``
    Two-dimensional ``ou`` with Q = [[1, theta], [-theta, 1]].
``franzke``
    Four-dimensional low-order stochastic climate model with slow variables
    (x1, x2) at indices 0, 1 and fast variables (y1, y2) at indices 2, 3.
``custom``
    Any Python callable ``kernel(x, rng) -> new_state``.

Every observed step applies ``stride`` internal Euler substeps of size ``h0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ModelInstabilityError

__all__ = [
    "FRANZKE_DEFAULTS",
    "ModelSpec",
    "random_real_spectrum_drift",
    "run_chunk",
    "sample_path",
    "simulate_path",
    "spiral_drift",
    "step",
]

FRANZKE_DEFAULTS = {
    "mu": 1.0,
    "L12": 1.0, "L21": -1.0, "L13": -0.2, "L24": 0.2,
    "a1": 1.0, "a2": -1.0, "d1": -0.2, "d2": -0.1,
    "F1": -0.25, "F2": 0.0, "F3": 0.0, "F4": 0.0,
    "B1_123": 4.0, "B1_213": 4.0, "B1_312": -8.0,
    "B2_131": 0.25, "B2_113": 0.25, "B2_311": -0.5,
    "B3_242": -0.3, "B3_224": -0.4, "B3_422": 0.7,
    "gamma1": 1.0, "gamma2": 1.0, "eps": 0.2, "sigma1": 3.0, "sigma2": 1.0,
}

KINDS = ("ou1d", "ou", "ou-spiral", "franzke", "custom")


def spiral_drift(theta):
    """Drift matrix [[1, theta], [-theta, 1]] of the rotating 2-d OU model."""
    return np.array([[1.0, theta], [-theta, 1.0]])


def random_real_spectrum_drift(d=10, seed=20190, low=0.5, high=2.0):
    """Random non-normal drift matrix whose eigenvalues are real and in [low, high].

    Built as V diag(lam) V^{-1} with V = I + G / sqrt(d), G standard normal,
    so the spectrum is exactly `lam` and the matrix is fixed by `seed`.
    """
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.uniform(low, high, size=d))[::-1]
    V = np.eye(d) + rng.standard_normal((d, d)) / np.sqrt(d)
    return V @ np.diag(lam) @ np.linalg.inv(V)


def _wrap_kernel(kernel):
    def custom_step(x, p, w, rng):
        x[:] = kernel(x.copy(), rng)
    return custom_step


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Immutable description of a discrete-time Markov kernel.

    Use the ``ou1d``, ``ou``, ``ou_spiral``, ``franzke`` and ``custom``
    constructors rather than calling this directly.
    """

    kind: str
    d: int
    h0: float
    stride: int = 1
    Q: np.ndarray | None = None
    theta: float | None = None
    franzke_params: dict | None = None
    kernel: object = None
    params: np.ndarray = field(init=False, repr=False)
    step_fn: object = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError("stride must be a positive integer")
        if self.kind in ("ou1d", "ou", "ou-spiral"):
            Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
            if Q.shape != (self.d, self.d):
                raise ValueError(f"Q has shape {Q.shape}, expected {(self.d, self.d)}")
            object.__setattr__(self, "Q", Q)
            F = np.eye(self.d) - Q * self.h0
            p = np.concatenate(([self.d, self.stride, np.sqrt(self.h0)], F.ravel()))
            fn = K.ou_step
        elif self.kind == "franzke":
            if self.d != 4:
                raise ValueError("franzke model has d = 4")
            fp = dict(FRANZKE_DEFAULTS)
            fp.update(self.franzke_params or {})
            unknown = set(fp) - set(FRANZKE_DEFAULTS)
            if unknown:
                raise ValueError(f"unknown franzke parameters {sorted(unknown)}")
            object.__setattr__(self, "franzke_params", fp)
            p = np.array([4.0, self.stride, self.h0, fp["mu"]]
                         + [fp[k] for k in K.FRANZKE_FIELDS])
            fn = K.franzke_step
        else:
            if not callable(self.kernel):
                raise ValueError("custom model needs a callable kernel")
            p = np.zeros(1)
            fn = _wrap_kernel(self.kernel)
        p.setflags(write=False)
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "step_fn", fn)

    @classmethod
    def ou1d(cls, Q=1.0, h0=0.01, stride=1):
        return cls("ou1d", 1, h0, stride, Q=[[float(Q)]])

    @classmethod
    def ou(cls, Q, h0=0.01, stride=1):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        return cls("ou", Q.shape[0], h0, stride, Q=Q)

    @classmethod
    def ou_spiral(cls, theta, h0=0.01, stride=1):
        return cls("ou-spiral", 2, h0, stride, Q=spiral_drift(theta), theta=float(theta))

    @classmethod
    def franzke(cls, h0=1e-4, stride=100, **params):
        return cls("franzke", 4, h0, stride, franzke_params=params)

    @classmethod
    def custom(cls, kernel, d, h=1.0):
        """Chain driven by ``kernel(x, gen) -> next state``.

        `gen` is the ``numpy.random.Generator`` of the active stream.  Custom
        kernels run interpreted, roughly a microsecond per step.
        """
        return cls("custom", d, h, 1, kernel=kernel)

    @property
    def h(self):
        """Observed time step, stride * h0."""
        return self.stride * self.h0

    @property
    def noise_dim(self):
        return {"franzke": 2, "custom": 0}.get(self.kind, self.d)

    def to_dict(self):
        out = {"kind": self.kind, "d": self.d, "h0": self.h0, "stride": self.stride}
        if self.kind == "ou-spiral":
            out["theta"] = self.theta
        elif self.kind in ("ou1d", "ou"):
            out["Q"] = self.Q.tolist()
        elif self.kind == "franzke":
            out["params"] = dict(self.franzke_params)
        return out


def _check(status, t, coord, offset=0):
    if status == K.NONFINITE:
        raise ModelInstabilityError(int(coord), offset + int(t))


def step(model, x, rng):
    """One observed step from `x`; returns a new state array."""
    x = np.array(x, dtype=float).reshape(model.d)
    w = np.empty(2 * model.d)
    model.step_fn(x, model.params, w, rng.gen)
    rng.workload += 1
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise ModelInstabilityError(int(bad[0]))
    return x


_CHUNK_DRAWS = 1 << 21


def _chunk_len(model):
    return max(1, _CHUNK_DRAWS // (model.stride * max(model.noise_dim, 1)))


def run_chunk(model, rset, imp, x, n, rng, store=True, offset=0):
    """Advance `x` in place by `n` observed steps.

    Returns ``(states, in_a, importance)`` for the `n` new states; `states` is
    None when `store` is False.  `offset` is only used in error messages.
    """
    X = np.empty((n, model.d) if store else (0, model.d))
    ina = np.empty(n, dtype=np.bool_)
    hv = np.empty(n)
    w = np.empty(2 * model.d)
    kern = K.pick(K.path_kernel, model.step_fn, rset.fn, imp.fn)
    status, t, coord = kern(model.step_fn, model.params, rset.fn, rset.params,
                            imp.fn, imp.params, x, w, n, rng.gen, store, X, ina, hv)
    rng.workload += int(t)
    _check(status, t, coord, offset)
    return (X if store else None), ina, hv


def sample_path(model, x0, n_steps, rng):
    """Array of the `n_steps` observed states following `x0`."""
    from .recurrency import ImportanceFunction, RecurrencySet

    x = np.array(x0, dtype=float).reshape(model.d)
    X, _, _ = run_chunk(model, RecurrencySet.empty(), ImportanceFunction(1.0),
                        x, int(n_steps), rng)
    return X


def simulate_path(model, x0, n_steps, rng, observer=None):
    """Simulate `n_steps` observed steps and return the final state.

    `observer`, if given, is called with each observed state in order.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    x = np.array(x0, dtype=float).reshape(model.d)
    done = 0
    chunk = _chunk_len(model)
    while done < n_steps:
        n = min(chunk, n_steps - done)
        try:
            X = sample_path(model, x, n, rng)
        except ModelInstabilityError as err:
            raise ModelInstabilityError(err.coordinate, done + err.step) from None
        if observer is not None:
            for row in X:
                observer(row)
        x = X[-1].copy()
        done += n
    return x
