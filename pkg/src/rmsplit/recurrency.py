"""Recurrency sets, importance functions and recurrency-cycle bookkeeping.

A recurrency cycle starts at an inward crossing of the set A, i.e. a step
with X_{n-1} outside A and X_n inside A, and lasts until the step before the
next inward crossing.  For every completed cycle we keep its origin (the
first state), its length, the time it spent in the rare set B and the
largest importance it reached.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from .errors import BudgetExceededError, InsufficientSamplesError
from .models import _chunk_len, run_chunk

__all__ = [
    "CycleRecord",
    "ImportanceFunction",
    "LevelSearch",
    "OriginStore",
    "QuantileValidation",
    "RecurrencySet",
    "collect_cycles",
    "crossing_counts",
    "detect_inward_crossing",
    "importance",
    "optimize_recurrency_level",
    "quantile_validation",
]

STORE_FORMAT = "rmsplit-origin-store/1"


@dataclass(frozen=True, eq=False)
class ImportanceFunction:
    """Map from states to [0, 1]; 0 on the recurrency set, 1 exactly on B.

    The distance-based kind is ``clip((x_1 - offset) / (u - offset), 0, 1)``,
    so B = {x_1 >= u}.  A custom kind wraps ``func(x) -> float``.
    """

    u: float
    offset: float = 0.0
    func: object = None
    fn: object = field(init=False, repr=False)
    params: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.func is None:
            if not self.u > self.offset:
                raise ValueError("distance-based importance needs u > offset")
            fn = K.distance_importance
        else:
            f = self.func

            def fn(x, hp):
                return f(x)
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "params", np.array([self.offset, self.u], dtype=float))

    @property
    def kind(self):
        return "distance" if self.func is None else "custom"

    def __call__(self, x):
        return float(self.fn(np.asarray(x, dtype=float).reshape(-1), self.params))

    def in_rare(self, x):
        return self(x) >= 1.0


def importance(H, x):
    """Importance value H(x)."""
    return H(x)


@dataclass(frozen=True, eq=False)
class RecurrencySet:
    """Recurrency set A with a deterministic membership test.

    Kinds: ``half-space`` {x_1 <= level}, ``level`` {H(x) <= level},
    ``empty``, ``full`` and ``custom`` (``predicate(x) -> bool``).
    """

    kind: str = "half-space"
    level: float = 0.0
    importance: ImportanceFunction | None = None
    predicate: object = None
    fn: object = field(init=False, repr=False)
    params: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        codes = {"half-space": K.SET_HALFSPACE, "level": K.SET_LEVEL,
                 "empty": K.SET_EMPTY, "full": K.SET_FULL}
        off, u = 0.0, 1.0
        if self.kind == "custom":
            pred = self.predicate

            def fn(x, ap):
                return bool(pred(x))
            code = -1
        elif self.kind in codes:
            fn = K.in_set
            code = codes[self.kind]
            if self.kind == "level":
                if self.importance is None or self.importance.kind != "distance":
                    raise ValueError("level sets need a distance-based importance")
                off, u = self.importance.offset, self.importance.u
        else:
            raise ValueError(f"unknown recurrency set kind {self.kind!r}")
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "params", np.array([code, self.level, off, u], dtype=float))

    @classmethod
    def half_space(cls, level=0.0):
        return cls("half-space", float(level))

    @classmethod
    def level_set(cls, H, level):
        return cls("level", float(level), importance=H)

    @classmethod
    def empty(cls):
        return cls("empty")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def custom(cls, predicate):
        return cls("custom", predicate=predicate)

    def contains(self, x):
        return bool(self.fn(np.asarray(x, dtype=float).reshape(-1), self.params))

    __contains__ = contains

    def to_dict(self):
        return {"kind": self.kind, "level": self.level}


def detect_inward_crossing(prev, cur, A):
    """True iff `prev` is outside A and `cur` is inside."""
    return (not A.contains(prev)) and A.contains(cur)


@dataclass(frozen=True)
class CycleRecord:
    origin: np.ndarray
    length: int
    time_in_b: int
    h_max: float


@dataclass(eq=False)
class OriginStore:
    """Completed recurrency cycles in simulation order.

    Attributes
    ----------
    origins : ndarray, shape (N_rec, d)
    lengths, time_in_b : int arrays, shape (N_rec,)
    h_max : float array, shape (N_rec,)
    """

    origins: np.ndarray
    lengths: np.ndarray
    time_in_b: np.ndarray
    h_max: np.ndarray

    def __post_init__(self):
        self.origins = np.atleast_2d(np.asarray(self.origins, dtype=float))
        self.lengths = np.asarray(self.lengths, dtype=np.int64)
        self.time_in_b = np.asarray(self.time_in_b, dtype=np.int64)
        self.h_max = np.asarray(self.h_max, dtype=float)
        n = len(self.lengths)
        if not (len(self.origins) == len(self.time_in_b) == len(self.h_max) == n):
            raise ValueError("store columns have different lengths")

    def __len__(self):
        return len(self.lengths)

    @property
    def n_rec(self):
        return len(self)

    @property
    def d(self):
        return self.origins.shape[1]

    @property
    def records(self):
        return [CycleRecord(self.origins[k].copy(), int(self.lengths[k]),
                            int(self.time_in_b[k]), float(self.h_max[k]))
                for k in range(len(self))]

    @property
    def alpha(self):
        """Inverse mean cycle length."""
        return len(self) / float(self.lengths.sum())

    @property
    def gamma(self):
        """Fraction of the covered steps spent in B."""
        return float(self.time_in_b.sum()) / float(self.lengths.sum())

    def head(self, n):
        return OriginStore(self.origins[:n], self.lengths[:n], self.time_in_b[:n],
                           self.h_max[:n])

    def save_csv(self, path):
        """One row per cycle: origin coordinates, length, time in B, max importance."""
        with open(path, "w", newline="") as fh:
            fh.write(f"# {STORE_FORMAT}\n")
            w = csv.writer(fh)
            w.writerow([f"x{j + 1}" for j in range(self.d)]
                       + ["length", "time_in_b", "h_max"])
            for k in range(len(self)):
                w.writerow([repr(float(v)) for v in self.origins[k]]
                           + [int(self.lengths[k]), int(self.time_in_b[k]),
                              repr(float(self.h_max[k]))])

    @classmethod
    def load_csv(cls, path):
        with open(path, newline="") as fh:
            first = fh.readline().strip()
            if first != f"# {STORE_FORMAT}":
                raise ValueError(f"{path}: not an origin store ({first!r})")
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        d = len(header) - 3
        a = np.array(body, dtype=float).reshape(-1, d + 3)
        return cls(a[:, :d], a[:, d].astype(np.int64), a[:, d + 1].astype(np.int64), a[:, d + 2])


class _CycleScanner:
    """Streams observed chunks and cuts them into recurrency cycles."""

    def __init__(self, prev_in, track_cycles=True):
        self.prev_in = bool(prev_in)
        self.track = track_cycles
        self.open = None  # [origin, start index, time in B, max importance]
        self.t = 0
        self.crossings = 0
        self.first_crossing = None
        self._origins, self._len, self._r, self._h = [], [], [], []

    @property
    def n_cycles(self):
        return len(self._len)

    def feed(self, X, ina, hv):
        n = len(ina)
        if n == 0:
            return np.empty(0, dtype=np.int64)
        prev = np.empty(n, dtype=np.bool_)
        prev[0] = self.prev_in
        prev[1:] = ina[:-1]
        idx = np.flatnonzero(ina & ~prev)
        self.prev_in = bool(ina[-1])
        if self.track:
            self._cut(X, idx, hv)
        if idx.size and self.first_crossing is None:
            self.first_crossing = self.t + int(idx[0])
        self.crossings += idx.size
        self.t += n
        return idx

    def _cut(self, X, idx, hv):
        n = len(hv)
        inb = (hv >= 1.0).astype(np.int64)
        bounds = np.concatenate(([0], idx, [n]))
        # segment j covers [bounds[j], bounds[j+1]); segment 0 continues the open cycle
        nonempty = bounds[:-1] < bounds[1:]
        starts = bounds[:-1][nonempty]
        rs = np.zeros(len(bounds) - 1, dtype=np.int64)
        hs = np.full(len(bounds) - 1, -np.inf)
        rs[nonempty] = np.add.reduceat(inb, starts)
        hs[nonempty] = np.maximum.reduceat(hv, starts)
        if self.open is not None:
            self.open[2] += rs[0]
            self.open[3] = max(self.open[3], hs[0])
        for j, c in enumerate(idx):
            if self.open is not None:
                self._origins.append(self.open[0])
                self._len.append(self.t + int(c) - self.open[1])
                self._r.append(self.open[2])
                self._h.append(self.open[3])
            self.open = [X[c].copy(), self.t + int(c), int(rs[j + 1]), float(hs[j + 1])]

    def store(self, limit=None):
        k = self.n_cycles if limit is None else min(limit, self.n_cycles)
        d = self._origins[0].shape[0] if self._origins else 1
        origins = np.array(self._origins[:k]).reshape(k, d)
        return OriginStore(origins, self._len[:k], self._r[:k], self._h[:k])


def _warm_up(model, A, H, x, n, rng):
    chunk = _chunk_len(model)
    done = 0
    ina = None
    while done < n:
        m = min(chunk, n - done)
        _, ina, _ = run_chunk(model, A, H, x, m, rng, store=False, offset=done)
        done += m
    return A.contains(x) if ina is None else bool(ina[-1])


def collect_cycles(model, A, H, x0, target_crossings, rng, warmup=10_000,
                   budget=10**9):
    """Simulate until `target_crossings` complete cycles are recorded.

    Steps before the first inward crossing after a warm-up of `warmup`
    observed steps are discarded.  Raises BudgetExceededError if more than
    `budget` observed steps are simulated, in particular when A is never
    entered from outside.
    """
    if target_crossings < 1:
        raise ValueError("target_crossings must be >= 1")
    x = np.array(x0, dtype=float).reshape(model.d)
    scanner = _CycleScanner(_warm_up(model, A, H, x, warmup, rng))
    chunk = _chunk_len(model)
    chunk = min(chunk, max(1000, 4 * int(target_crossings)))
    spent = 0
    while scanner.n_cycles < target_crossings:
        if spent >= budget:
            what = "before the first inward crossing" if scanner.crossings == 0 else ""
            raise BudgetExceededError(f"step budget {budget} exhausted {what}".strip())
        n = min(chunk, budget - spent)
        X, ina, hv = run_chunk(model, A, H, x, n, rng, offset=spent)
        scanner.feed(X, ina, hv)
        spent += n
    return scanner.store(target_crossings)


def crossing_counts(scores, grid):
    """Number of steps with s_n > l >= s_{n+1} for every l in `grid`.

    This is the count of inward crossings of A(l) = {s <= l} along the trace.
    """
    s = np.asarray(scores, dtype=float)
    down = s[1:] < s[:-1]
    lo = np.sort(s[1:][down])
    hi = np.sort(s[:-1][down])
    g = np.asarray(grid, dtype=float)
    return np.searchsorted(lo, g, side="right") - np.searchsorted(hi, g, side="right")


@dataclass
class LevelSearch:
    level: float
    grid: np.ndarray
    counts: np.ndarray
    warning: bool


def optimize_recurrency_level(trace, grid):
    """Grid level maximizing the inward-crossing count of A(l) along `trace`.

    `trace` is either a 1-d array of scores (A(l) = {score <= l}) or an
    (n, d) array of states, in which case the first coordinate is used.
    Ties go to the smallest level; ``warning`` is set when no level is ever
    crossed.
    """
    t = np.asarray(trace, dtype=float)
    if t.ndim == 2:
        t = t[:, 0]
    if len(t) < 2:
        raise ValueError("trace needs at least two states")
    g = np.sort(np.asarray(grid, dtype=float))
    if g.size == 0:
        raise ValueError("empty grid")
    counts = crossing_counts(t, g)
    best = int(np.argmax(counts))
    return LevelSearch(float(g[best]), g, counts, bool(counts[best] == 0))


@dataclass
class QuantileValidation:
    q: float
    n_all: int
    n_top: int
    mean_all: np.ndarray
    var_all: np.ndarray
    mean_top: np.ndarray
    var_top: np.ndarray
    ks: np.ndarray
    divergence: float
    threshold: float
    p_value: float

    @property
    def rejected(self):
        return self.divergence > self.threshold


def _max_ks(all_sorted, sub):
    n = all_sorted.shape[0]
    best = 0.0
    for j in range(all_sorted.shape[1]):
        a = all_sorted[:, j]
        b = np.sort(sub[:, j])
        pts = np.concatenate((a, b))
        fa = np.searchsorted(a, pts, side="right") / n
        fb = np.searchsorted(b, pts, side="right") / len(b)
        best = max(best, float(np.max(np.abs(fa - fb))))
    return best


def quantile_validation(store, q, rng=None, n_null=200, level=0.01):
    """Compare all cycle origins with those of the top-`q` cycles by max importance.

    The divergence is the two-sample Kolmogorov-Smirnov statistic maximized
    over coordinates.  Its null distribution is obtained by drawing random
    subsets of the same size from the origins (`n_null` draws); the
    threshold is the (1 - `level`) quantile of those draws.
    """
    if not 0 < q <= 1:
        raise ValueError("q must be in (0, 1]")
    n = len(store)
    if n < 1 / q:
        raise InsufficientSamplesError(f"need at least {math.ceil(1 / q)} cycles, have {n}")
    k = math.ceil(q * n)
    if k < 30:
        raise InsufficientSamplesError(f"top fraction holds {k} < 30 origins")
    order = np.argsort(store.h_max, kind="stable")
    X = store.origins
    top = X[order[n - k:]]
    ks = np.array([stats.ks_2samp(X[:, j], top[:, j]).statistic if k < n else 0.0
                   for j in range(store.d)])
    div = float(ks.max())
    if rng is None:
        from .rng import RngStream
        rng = RngStream(0, (7,))
    Xs = np.sort(X, axis=0)
    null = np.array([_max_ks(Xs, X[rng.gen.choice(n, size=k, replace=False)])
                     for _ in range(n_null)]) if k < n else np.zeros(n_null)
    thr = float(np.quantile(null, 1 - level))
    p = float((1 + np.sum(null >= div)) / (n_null + 1))
    return QuantileValidation(q, n, k, X.mean(0), X.var(0, ddof=1), top.mean(0),
                              top.var(0, ddof=1) if k > 1 else np.zeros(store.d),
                              ks, div, thr, p)
