"""Experiment configuration files.

A config is a YAML mapping (JSON works too) with the sections below; all
keys except ``model.kind`` are optional.

.. code-block:: yaml

    seed: 0
    model:
      kind: ou1d            # ou1d | ou | ou-spiral | franzke
      h0: 0.01
      stride: 1
      Q: 1.0                # ou1d scalar or ou matrix
      random_drift: {d: 10, seed: 20190}   # ou: random real-spectrum drift
      theta: 3.0            # ou-spiral
      params: {sigma1: 3.0} # franzke overrides
    recurrency:
      kind: half-space      # half-space | level
      level: 0.0
      grid: {start: 5, stop: 11, step: 0.1}   # tune-level, or a list
      tune_steps: 1000000
      importance: {offset: 0.0}
      u: [2.19]             # thresholds, or
      gamma: [1.0e-3]       # OU only: thresholds from the exact law
      q: 0.05               # validate
    estimation:
      target_re: 0.02
      replicas: 20
      n_rec: 10000
      alpha_crossings: 100000
      batches: 30
      warmup: 10000
      pilot_levels: 20
      pilot_successes: 100
      stage_budget: 10000000
      mc_steps: 0           # > 0 attaches a plain Monte Carlo run per threshold
    output:
      dir: out
      format: [json, csv]

A report written by the CLI embeds the resolved config under
``experiment``; passing the report back as ``--config`` reruns it.
"""

from __future__ import annotations

import copy
import logging
import math

import numpy as np
import yaml

from .driver import RmsConfig
from .models import ModelSpec, random_real_spectrum_drift
from .oracle import invert_gamma, solve_stationary_covariance
from .recurrency import ImportanceFunction, RecurrencySet

__all__ = ["ConfigError", "Experiment", "load_config"]

log = logging.getLogger("rmsplit")

SCHEMA = "rmsplit-config/1"

_SECTIONS = {
    "model": {"kind", "h0", "stride", "Q", "theta", "params", "random_drift"},
    "recurrency": {"kind", "level", "grid", "tune_steps", "importance", "u", "gamma", "q"},
    "estimation": {"target_re", "replicas", "n_rec", "alpha_crossings", "batches", "warmup",
                   "pilot_levels", "pilot_successes", "stage_budget", "mc_steps",
                   "collect_budget"},
    "output": {"dir", "format"},
}
_TOP = set(_SECTIONS) | {"seed", "schema"}


class ConfigError(ValueError):
    """Invalid or unreadable configuration; the message names the field."""


def _num(sec, key, value, kind=float, positive=False):
    try:
        if kind is int:
            v = float(value)
            if v != int(v):
                raise ValueError
            v = int(v)
        else:
            v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{sec}.{key}: expected {kind.__name__}, got {value!r}") from None
    if positive and not v > 0:
        raise ConfigError(f"{sec}.{key}: must be positive, got {value!r}")
    return v


class Experiment:
    """Validated experiment: model, recurrency set, thresholds and settings."""

    def __init__(self, raw, seed_override=None):
        if not isinstance(raw, dict):
            raise ConfigError("top level: expected a mapping")
        if "experiment" in raw and isinstance(raw["experiment"], dict):
            raw = raw["experiment"]
        unknown = set(raw) - _TOP
        if unknown:
            raise ConfigError(f"top level: unknown keys {sorted(unknown)}")
        for sec, keys in _SECTIONS.items():
            val = raw.get(sec, {})
            if not isinstance(val, dict):
                raise ConfigError(f"{sec}: expected a mapping")
            bad = set(val) - keys
            if bad:
                raise ConfigError(f"{sec}: unknown keys {sorted(bad)}")
        if "model" not in raw:
            raise ConfigError("model: section missing")
        self.raw = copy.deepcopy(raw)
        if seed_override is not None:
            self.seed = int(seed_override)
        elif "seed" in raw:
            self.seed = _num("top level", "seed", raw["seed"], int)
        else:
            log.warning("no seed given; using the default seed 0")
            self.seed = 0
        self.raw["seed"] = self.seed
        self.model = self._model(raw["model"])
        self._recurrency(raw.get("recurrency", {}))
        self.settings = self._estimation(raw.get("estimation", {}))
        out = raw.get("output", {})
        self.out_dir = str(out.get("dir", "out"))
        fmt = out.get("format", ["json", "csv"])
        self.formats = [fmt] if isinstance(fmt, str) else list(fmt)
        if not set(self.formats) <= {"json", "csv"}:
            raise ConfigError(f"output.format: expected json and/or csv, got {fmt!r}")

    def _model(self, sec):
        kind = sec.get("kind")
        stride = _num("model", "stride", sec.get("stride", 1), int, True)
        try:
            if kind == "ou1d":
                return ModelSpec.ou1d(_num("model", "Q", sec.get("Q", 1.0)),
                                      _num("model", "h0", sec.get("h0", 0.01), float, True),
                                      stride)
            if kind == "ou":
                h0 = _num("model", "h0", sec.get("h0", 0.01), float, True)
                if "random_drift" in sec:
                    rd = sec["random_drift"] or {}
                    Q = random_real_spectrum_drift(int(rd.get("d", 10)),
                                                   int(rd.get("seed", 20190)))
                elif "Q" in sec:
                    Q = np.asarray(sec["Q"], dtype=float)
                else:
                    raise ConfigError("model.Q: required for kind 'ou'")
                return ModelSpec.ou(Q, h0, stride)
            if kind == "ou-spiral":
                return ModelSpec.ou_spiral(_num("model", "theta", sec.get("theta", 1.0)),
                                           _num("model", "h0", sec.get("h0", 0.01), float, True),
                                           stride)
            if kind == "franzke":
                return ModelSpec.franzke(
                    _num("model", "h0", sec.get("h0", 1e-4), float, True),
                    _num("model", "stride", sec.get("stride", 100), int, True),
                    **{k: float(v) for k, v in (sec.get("params") or {}).items()})
        except ConfigError:
            raise
        except (TypeError, ValueError) as err:
            raise ConfigError(f"model: {err}") from None
        raise ConfigError(f"model.kind: expected ou1d, ou, ou-spiral or franzke, got {kind!r}")

    def _recurrency(self, sec):
        self.set_kind = sec.get("kind", "half-space")
        if self.set_kind not in ("half-space", "level"):
            raise ConfigError(f"recurrency.kind: expected half-space or level, "
                              f"got {self.set_kind!r}")
        self.level = _num("recurrency", "level", sec.get("level", 0.0))
        imp = sec.get("importance") or {}
        if not isinstance(imp, dict) or set(imp) - {"kind", "offset"}:
            raise ConfigError("recurrency.importance: expected {kind: distance, offset: x}")
        if imp.get("kind", "distance") != "distance":
            raise ConfigError("recurrency.importance.kind: only 'distance' is configurable")
        self.offset = _num("recurrency.importance", "offset", imp.get("offset", 0.0))
        self.q = _num("recurrency", "q", sec.get("q", 0.05))
        self.tune_steps = _num("recurrency", "tune_steps", sec.get("tune_steps", 10**6),
                               int, True)
        grid = sec.get("grid")
        if grid is None:
            self.grid = None
        elif isinstance(grid, dict):
            try:
                start, stop, step = (float(grid[k]) for k in ("start", "stop", "step"))
                n = int(math.floor((stop - start) / step + 1e-9)) + 1
                self.grid = np.round(start + step * np.arange(n), 12)
            except (KeyError, TypeError, ValueError):
                raise ConfigError("recurrency.grid: expected {start, stop, step} or a list") \
                    from None
        else:
            self.grid = np.array([_num("recurrency", "grid", g) for g in grid])
        self.gamma_targets = None
        if "u" in sec and "gamma" in sec:
            raise ConfigError("recurrency: give either u or gamma, not both")
        if "gamma" in sec:
            if self.model.kind not in ("ou1d", "ou", "ou-spiral"):
                raise ConfigError("recurrency.gamma: thresholds from gamma need an OU model")
            g = sec["gamma"] if isinstance(sec["gamma"], list) else [sec["gamma"]]
            self.gamma_targets = [_num("recurrency", "gamma", v) for v in g]
            if not all(0 < v < 1 for v in self.gamma_targets):
                raise ConfigError("recurrency.gamma: values must lie in (0, 1)")
            cov = solve_stationary_covariance(self.model.Q, self.model.h0)
            self.thresholds = [invert_gamma(cov, v) for v in self.gamma_targets]
        else:
            u = sec.get("u", [])
            u = u if isinstance(u, list) else [u]
            self.thresholds = [_num("recurrency", "u", v) for v in u]
        for u in self.thresholds:
            if not u > self.offset:
                raise ConfigError(f"recurrency.u: threshold {u} must exceed the importance "
                                  f"offset {self.offset}")

    def _estimation(self, sec):
        ints = {"replicas": "n_replicas", "n_rec": "n_rec", "alpha_crossings": "alpha_crossings",
                "batches": "batches", "warmup": "warmup", "pilot_levels": "pilot_levels",
                "pilot_successes": "pilot_successes", "stage_budget": "stage_budget"}
        kw = {}
        if "target_re" in sec:
            kw["target_re"] = _num("estimation", "target_re", sec["target_re"], float, True)
        for key, field in ints.items():
            if key in sec:
                kw[field] = _num("estimation", key, sec[key], int)
        self.mc_steps = _num("estimation", "mc_steps", sec.get("mc_steps", 0), int)
        self.collect_budget = _num("estimation", "collect_budget",
                                   sec.get("collect_budget", 10**9), int, True)
        try:
            return RmsConfig(**kw)
        except ValueError as err:
            raise ConfigError(f"estimation: {err}") from None

    def require_thresholds(self):
        if not self.thresholds:
            raise ConfigError("recurrency.u: at least one threshold is required")

    def recurrency_set(self, H=None):
        if self.set_kind == "half-space":
            return RecurrencySet.half_space(self.level)
        return RecurrencySet.level_set(H, self.level)

    def importance(self, u):
        return ImportanceFunction(float(u), self.offset)

    def resolved(self):
        """Config dict with every default filled in."""
        r = copy.deepcopy(self.raw)
        r["schema"] = SCHEMA
        r.setdefault("model", {}).setdefault("kind", self.model.kind)
        est = r.setdefault("estimation", {})
        s = self.settings
        for key, field in (("target_re", "target_re"), ("replicas", "n_replicas"),
                           ("n_rec", "n_rec"), ("alpha_crossings", "alpha_crossings"),
                           ("batches", "batches"), ("warmup", "warmup"),
                           ("pilot_levels", "pilot_levels"),
                           ("pilot_successes", "pilot_successes"),
                           ("stage_budget", "stage_budget")):
            est.setdefault(key, getattr(s, field))
        est.setdefault("mc_steps", self.mc_steps)
        rec = r.setdefault("recurrency", {})
        rec.setdefault("kind", self.set_kind)
        rec.setdefault("level", self.level)
        rec.setdefault("q", self.q)
        return r


def load_config(path, seed_override=None):
    """Parse and validate a config file; raises ConfigError with a location."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror}") from None
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}:{where} {getattr(err, 'problem', err)}") from None
    return Experiment(raw, seed_override)
