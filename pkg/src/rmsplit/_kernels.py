"""Compiled inner loops.

The drivers take the model step, the recurrency-set membership test and the
importance function as arguments.  With the built-in (jitted) functions they
run in nopython mode; with user-supplied Python callables the same source
runs interpreted through ``.py_func`` (see :func:`pick`).  Kernels never
raise: they return a status code and the Python side raises.

Parameter-array layouts
-----------------------
model (OU)        [d, s, sqrt(h0), F row-major (d*d)] with F = I - Q h0
model (franzke)   [4, s, h0, mu, *FRANZKE_FIELDS]
recurrency set    [kind, level, h_offset, h_u]
importance        [h_offset, h_u]
"""

import numpy as np
from numba import njit
from numba.core.registry import CPUDispatcher

OK = 0
BUDGET = 1
NONFINITE = 2
NOSUCCESS = 3

SET_HALFSPACE = 0
SET_LEVEL = 1
SET_EMPTY = 2
SET_FULL = 3

# offsets into the franzke parameter vector, after [d, s, h0, mu]
FRANZKE_FIELDS = (
    "L12", "L21", "L13", "L24", "a1", "a2", "d1", "d2",
    "F1", "F2", "F3", "F4",
    "B1_123", "B1_213", "B1_312", "B2_131", "B2_113", "B2_311",
    "B3_242", "B3_224", "B3_422",
    "gamma1", "gamma2", "eps", "sigma1", "sigma2",
)


def pick(kernel, *fns):
    """Compiled `kernel` if every callable in `fns` is jitted, else its Python source."""
    if all(isinstance(f, CPUDispatcher) for f in fns):
        return kernel
    return kernel.py_func


@njit(nogil=True, cache=True)
def ou_step(x, p, w, rng):
    d = x.shape[0]
    s = int(p[1])
    sq = p[2]
    for _ in range(s):
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += p[3 + i * d + j] * x[j]
            w[i] = acc + sq * rng.standard_normal()
        for i in range(d):
            x[i] = w[i]


@njit(nogil=True, cache=True)
def franzke_step(x, p, w, rng):
    s = int(p[1])
    h = p[2]
    mu = p[3]
    (L12, L21, L13, L24, a1, a2, d1, d2, F1, F2, F3, F4,
     b123, b213, b312, b131, b113, b311, b242, b224, b422,
     g1, g2, eps, sig1, sig2) = (
        p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11], p[12], p[13],
        p[14], p[15], p[16], p[17], p[18], p[19], p[20], p[21], p[22],
        p[23], p[24], p[25], p[26], p[27], p[28], p[29])
    n1 = sig1 / np.sqrt(eps) * np.sqrt(h)
    n2 = sig2 / np.sqrt(eps) * np.sqrt(h)
    for _ in range(s):
        x1 = x[0]
        x2 = x[1]
        y1 = x[2]
        y2 = x[3]
        f1 = (-x2 * (L12 + a1 * x1 + a2 * x2) + d1 * x1 + F1 + L13 * y1
              + b123 * x2 * y1 + (b131 + b113) * x1 * y1)
        f2 = (x1 * (L21 + a1 * x1 + a2 * x2) + d2 * x2 + F2 + L24 * y2
              + b213 * x1 * y1 + (b242 + b224) * x2 * y2)
        f3 = -L13 * x1 + b312 * x1 * x2 + b311 * x1 * x1 + F3 - g1 / eps * y1
        f4 = -L24 * x2 + b422 * x2 * x2 + F4 - g2 / eps * y2
        z1 = rng.standard_normal()
        z2 = rng.standard_normal()
        x[0] = x1 + mu * f1 * h
        x[1] = x2 + mu * f2 * h
        x[2] = y1 + mu * f3 * h + n1 * z1
        x[3] = y2 + mu * f4 * h + n2 * z2


@njit(nogil=True, cache=True)
def distance_importance(x, hp):
    v = (x[0] - hp[0]) / (hp[1] - hp[0])
    if v <= 0.0:
        return 0.0
    if v >= 1.0:
        return 1.0
    return v


@njit(nogil=True, cache=True)
def in_set(x, ap):
    kind = int(ap[0])
    if kind == SET_HALFSPACE:
        return x[0] <= ap[1]
    if kind == SET_LEVEL:
        return distance_importance(x, ap[2:4]) <= ap[1]
    if kind == SET_EMPTY:
        return False
    return True


@njit(nogil=True)
def _bad_coord(x):
    for i in range(x.shape[0]):
        if not np.isfinite(x[i]):
            return i
    return -1


@njit(nogil=True)
def path_kernel(step, mp, in_a, ap, imp, hp, x, w, n, rng, store, out_x, out_in, out_h):
    """Advance `x` by `n` observed steps, recording membership and importance.

    Returns (status, step index, coordinate) with status NONFINITE on blow-up.
    """
    for t in range(n):
        step(x, mp, w, rng)
        bad = _bad_coord(x)
        if bad >= 0:
            return NONFINITE, t, bad
        if store:
            out_x[t, :] = x
        out_in[t] = in_a(x, ap)
        out_h[t] = imp(x, hp)
    return OK, n, -1


@njit(nogil=True)
def continuation(step, mp, in_a, ap, imp, hp, x, w, target, final, budget, rng):
    """Run one path continuation from `x` (modified in place).

    Non-final: stop at the first state (including the start) with importance
    >= target (outcome 1) or at a completed inward crossing into A (outcome 0).
    Final: run until the inward crossing, counting states in B from the start.

    Returns (outcome, steps, time in B, bad coordinate); outcome -1 means the
    step budget ran out, -2 a non-finite state.
    """
    prev = in_a(x, ap)
    steps = 0
    r = 0
    if final:
        if imp(x, hp) >= 1.0:
            r = 1
    elif imp(x, hp) >= target:
        return 1, 0, 0, -1
    while True:
        if steps >= budget:
            return -1, steps, r, -1
        step(x, mp, w, rng)
        steps += 1
        bad = _bad_coord(x)
        if bad >= 0:
            return -2, steps, r, bad
        cur = in_a(x, ap)
        if cur and not prev:
            return 0, steps, r, -1
        h = imp(x, hp)
        if final:
            if h >= 1.0:
                r += 1
        elif h >= target:
            return 1, steps, r, -1
        prev = cur


@njit(nogil=True)
def stage_kernel(cont, step, mp, in_a, ap, imp, hp, states, n_branch, target, final,
                 budget, w, rng, out_states, out_parent, out_r):
    """One splitting stage: `n_branch` continuations from every entrance state.

    Successes are written to out_states/out_parent in processing order; in
    the final stage out_r[i * n_branch + b] receives the time spent in B.
    Returns (status, number of successes, total steps, info) where info is the
    offending coordinate for NONFINITE.
    """
    d = states.shape[1]
    x = np.empty(d)
    n_out = 0
    total = 0
    for i in range(states.shape[0]):
        for b in range(n_branch):
            x[:] = states[i]
            out, steps, r, bad = cont(step, mp, in_a, ap, imp, hp, x, w,
                                target, final, budget, rng)
            total += steps
            if out == -1:
                return BUDGET, n_out, total, -1
            if out == -2:
                return NONFINITE, n_out, total, bad
            if final:
                out_r[i * n_branch + b] = r
            elif out == 1:
                out_states[n_out, :] = x
                out_parent[n_out] = i
                n_out += 1
    return OK, n_out, total, -1


@njit(nogil=True)
def fns_kernel(cont, step, mp, in_a, ap, imp, hp, pool, k_s, target, budget,
               max_trials, w, rng, out_states):
    """Fixed-number-of-successes level: restart from uniform picks of `pool`.

    Returns (status, trials, total steps, info).
    """
    d = pool.shape[1]
    x = np.empty(d)
    succ = 0
    trials = 0
    total = 0
    while succ < k_s:
        if trials >= max_trials:
            return NOSUCCESS, trials, total, -1
        x[:] = pool[rng.integers(0, pool.shape[0])]
        out, steps, r, bad = cont(step, mp, in_a, ap, imp, hp, x, w,
                                target, False, budget, rng)
        total += steps
        trials += 1
        if out == -1:
            return BUDGET, trials, total, -1
        if out == -2:
            return NONFINITE, trials, total, bad
        if out == 1:
            out_states[succ, :] = x
            succ += 1
    return OK, trials, total, -1


@njit(nogil=True)
def one_step_kernel(step, mp, states, w, rng):
    """Advance every row of `states` by one observed step, in place."""
    for i in range(states.shape[0]):
        step(states[i], mp, w, rng)


@njit(nogil=True)
def membership_kernel(in_a, ap, imp, hp, X, out_in, out_h):
    """Set membership and importance of every row of `X`."""
    for i in range(X.shape[0]):
        out_in[i] = in_a(X[i], ap)
        out_h[i] = imp(X[i], hp)


@njit(nogil=True)
def count_kernel(step, mp, imp, hp, x, w, n, rng, n_batches, batch_len, out_hits):
    """Count observed steps with importance >= 1, per batch of `batch_len` steps.

    Returns (status, steps, coordinate).
    """
    t = 0
    for b in range(n_batches):
        hits = 0
        for _ in range(batch_len):
            step(x, mp, w, rng)
            bad = _bad_coord(x)
            if bad >= 0:
                return NONFINITE, t, bad
            t += 1
            if imp(x, hp) >= 1.0:
                hits += 1
        out_hits[b] = hits
    return OK, n, -1
