"""Shared fixtures: a 3-state toy chain with exact first-passage quantities.

States are the scalars 0, 1, 2.  A = {x <= 0} = {0}, the importance is
distance-based with u = 2 so H = (0, 0.5, 1) and B = {2}.  Every exact
quantity below is computed by solving linear systems over the chain, an
independent route from the simulation code.
"""

import itertools

import numpy as np
import pytest

from rmsplit import ImportanceFunction, ModelSpec, RecurrencySet

TOY_P = np.array([[0.5, 0.4, 0.1],
                  [0.6, 0.2, 0.2],
                  [0.3, 0.3, 0.4]])
TOY_H = np.array([0.0, 0.5, 1.0])
TOY_IN_A = np.array([True, False, False])

# hand-derived values, cross-checked against the linear-system oracle below
TOY_PB = 2 / 5
TOY_TB = 16 / 21
TOY_ALPHA = 21 / 85
TOY_GAMMA = 16 / 85


def toy_kernel(x, gen):
    cum = np.cumsum(TOY_P[int(x[0])])
    return np.array([float(min(np.searchsorted(cum, gen.random(), side="right"), 2))])


def toy_model():
    return ModelSpec.custom(toy_kernel, d=1)


def toy_sets():
    return RecurrencySet.half_space(0.0), ImportanceFunction(2.0)


def toy_stationary():
    w, v = np.linalg.eig(TOY_P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    return pi / pi.sum()


def _crossing(i, j):
    return (not TOY_IN_A[i]) and TOY_IN_A[j]


def continuation_outcomes(start, target):
    """Exact law of a non-final continuation from state `start`.

    Returns {success state: probability}; the remainder is failure.  The
    chain state is (current state, previous-in-A flag); the start flag is
    the start state's own membership, so crossings depend only on the
    transition taken.
    """
    if TOY_H[start] >= target:
        return {start: 1.0}
    # unknowns: prob of ending at success state s, from each non-success state
    live = [i for i in range(3) if TOY_H[i] < target]
    succ = [i for i in range(3) if TOY_H[i] >= target]
    idx = {s: k for k, s in enumerate(live)}
    n = len(live)
    out = {}
    for s in succ:
        Am = np.eye(n)
        b = np.zeros(n)
        for i in live:
            for j in range(3):
                if _crossing(i, j):
                    continue
                if j == s:
                    b[idx[i]] += TOY_P[i, j]
                elif j in idx:
                    Am[idx[i], idx[j]] -= TOY_P[i, j]
        out[s] = float(np.linalg.solve(Am, b)[idx[start]])
    return out


def expected_time_in_b(start):
    """E[number of B states from `start` (inclusive) to the next inward crossing]."""
    Am = np.eye(3)
    b = (TOY_H >= 1.0).astype(float)
    for i in range(3):
        for j in range(3):
            if not _crossing(i, j):
                Am[i, j] -= TOY_P[i, j]
    return float(np.linalg.solve(Am, b)[start])


def exact_reach_prob(level):
    """P(a cycle from state 0 reaches importance >= level)."""
    return sum(continuation_outcomes(0, level).values())


def exact_alpha():
    pi = toy_stationary()
    return float(sum(pi[i] * TOY_P[i, j] for i in range(3) for j in range(3)
                     if _crossing(i, j)))


def _binomial_states(dist, n):
    """Law of the multiset of success states from n i.i.d. continuations."""
    keys = list(dist)
    fail = 1.0 - sum(dist.values())
    law = {}
    for combo in itertools.product(keys + [None], repeat=n):
        p = 1.0
        for c in combo:
            p *= fail if c is None else dist[c]
        ms = tuple(sorted(c for c in combo if c is not None))
        law[ms] = law.get(ms, 0.0) + p
    return law


def enumerate_tree(levels, factors):
    """Exact law of the success counts r_0..r_m of one run from state 0.

    Returns a list of (probability, counts, final entrance states).
    """
    m = len(levels)
    layers = [(1.0, (factors[0],), (0,) * factors[0])]
    for k in range(m):
        branch = 1 if k == 0 else factors[k]
        nxt = []
        for p, counts, states in layers:
            # product over entrance states of their offspring laws
            partial = [(p, ())]
            for s in states:
                law = _binomial_states(continuation_outcomes(s, levels[k]), branch)
                partial = [(q * lp, acc + ms) for q, acc in partial for ms, lp in law.items()]
            for q, acc in partial:
                nxt.append((q, counts + (len(acc),), tuple(sorted(acc))))
        layers = nxt
    return layers


@pytest.fixture
def toy():
    A, H = toy_sets()
    return toy_model(), A, H


# acceptance criteria outcomes, printed once at the end of the session
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
