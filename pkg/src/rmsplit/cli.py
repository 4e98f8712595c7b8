"""Command-line front end: ``rmsplit <command> --config FILE``.

Commands
--------
estimate    full estimation per threshold; JSON report and CSV table
mc          plain long-run Monte Carlo per threshold
oracle      stationary covariance and exact gamma(u) for OU models
tune-level  crossing counts over a level grid and the best level
validate    quantile validation of the recurrency set
pilot       origin store, pilot and resulting splitting plan
compare     efficiency ratio, from report files or by running both methods

Exit codes: 0 success, 2 config error, 3 runtime or model error,
4 step budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import warnings

import numpy as np

from .driver import _clean, compare, run_mc_gamma, run_rms
from .errors import BudgetExceededError, RmsError
from .oracle import gamma_oracle, solve_stationary_covariance
from .recurrency import collect_cycles, optimize_recurrency_level, quantile_validation
from .rng import RngStream
from .config import ConfigError, load_config
from .models import sample_path
from .splitting import run_pilot_fns

__all__ = ["main"]

log = logging.getLogger("rmsplit")

TABLE_SCHEMA = "rmsplit-table/1"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_BUDGET = 0, 2, 3, 4

# stream ids used by the CLI, distinct from those inside run_rms
_MC, _TUNE, _VALIDATE = 10, 11, 12


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else "%.17g" % v
    return str(v)


def write_table(path, columns, rows):
    """CSV with a schema line, a header and floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# {TABLE_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


class _Run:
    def __init__(self, args):
        self.args = args
        self.exp = load_config(args.config, args.seed)
        self.out = args.out_dir or self.exp.out_dir
        self.formats = [args.format] if args.format else self.exp.formats
        threads = args.threads or os.cpu_count() or 1
        self.settings = dataclasses.replace(self.exp.settings, threads=threads)
        os.makedirs(self.out, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out, name)

    def emit(self, stem, payload, columns, rows):
        if "json" in self.formats:
            write_json(self.path(stem + ".json"), payload)
        if "csv" in self.formats:
            write_table(self.path(stem + ".csv"), columns, rows)
        for row in rows:
            print("  ".join(f"{c}={_fmt(row.get(c))}" for c in columns))


def _mc(run, u, idx):
    H = run.exp.importance(u)
    return run_mc_gamma(run.exp.model, H, run.exp.mc_steps, run.settings.batches,
                        warmup=run.settings.warmup, rng=RngStream(run.exp.seed, (_MC, idx)))


def _estimate_all(run, with_mc):
    exp = run.exp
    exp.require_thresholds()
    rows, reports = [], []
    for i, u in enumerate(exp.thresholds):
        H = exp.importance(u)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = run_rms(exp.model, exp.recurrency_set(H), H, run.settings, seed=exp.seed)
        mc = None
        if with_mc and exp.mc_steps > 0:
            mc = _mc(run, u, i)
            if mc.hits > 0:
                compare(rep, mc)
        for w in rep.warnings:
            log.warning("u=%s: %s", _fmt(u), w)
        d = rep.to_dict()
        d.pop("config", None)
        d["u"] = u
        d["mc"] = mc.to_dict() if mc else None
        if exp.gamma_targets:
            d["gamma_target"] = exp.gamma_targets[i]
        reports.append(d)
        rows.append({"u": u, "gamma_target": exp.gamma_targets[i] if exp.gamma_targets else None,
                     "gamma_hat": rep.gamma, "re_gamma": rep.re_gamma,
                     "eff": rep.efficiency, "re_t": rep.re_t, "alpha": rep.alpha,
                     "re_alpha": rep.re_alpha,
                     "gamma_mc": mc.gamma if mc else None, "re_mc": mc.re if mc else None})
    return rows, reports


_EST_COLS = ["u", "gamma_target", "gamma_hat", "re_gamma", "eff", "re_t", "alpha", "re_alpha",
             "gamma_mc", "re_mc"]


def cmd_estimate(run):
    rows, reports = _estimate_all(run, with_mc=True)
    run.emit("estimate", {"experiment": run.exp.resolved(), "results": reports},
             _EST_COLS, rows)


def cmd_compare(run):
    if run.args.report and run.args.mc:
        with open(run.args.report) as fh:
            rep = json.load(fh)
        with open(run.args.mc) as fh:
            mc = json.load(fh)
        rows = []
        for r, m in zip(rep["results"], mc["results"]):
            eff = (m["workload"] * m["re"] ** 2) / (r["workload_replica"] * r["re_gamma"] ** 2)
            rows.append({"u": r["u"], "eff": eff})
        run.emit("compare", {"results": rows}, ["u", "eff"], rows)
        return
    if run.exp.mc_steps <= 0:
        raise ConfigError("estimation.mc_steps: must be positive for compare")
    rows, reports = _estimate_all(run, with_mc=True)
    run.emit("compare", {"experiment": run.exp.resolved(), "results": reports},
             _EST_COLS, rows)


def cmd_mc(run):
    exp = run.exp
    exp.require_thresholds()
    if exp.mc_steps <= 0:
        raise ConfigError("estimation.mc_steps: must be positive for mc")
    rows = []
    for i, u in enumerate(exp.thresholds):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = _mc(run, u, i)
        rows.append({"u": u, "gamma": res.gamma, "re": res.re, "workload": res.workload,
                     "hits": res.hits})
    run.emit("mc", {"experiment": exp.resolved(), "results": rows},
             ["u", "gamma", "re", "workload", "hits"], rows)


def cmd_oracle(run):
    m = run.exp.model
    if m.kind not in ("ou1d", "ou", "ou-spiral"):
        raise ConfigError("model.kind: the oracle needs an OU model")
    cov = solve_stationary_covariance(m.Q, m.h0)
    rows = [{"u": u, "gamma": gamma_oracle(cov, u)} for u in run.exp.thresholds]
    print("M =\n" + np.array2string(cov.M, precision=17))
    run.emit("oracle", {"M": cov.M, "residual": cov.residual, "results": rows},
             ["u", "gamma"], rows)


def cmd_tune_level(run):
    exp = run.exp
    if exp.grid is None:
        raise ConfigError("recurrency.grid: required for tune-level")
    rng = RngStream(exp.seed, (_TUNE,))
    m = exp.model
    x = sample_path(m, np.zeros(m.d), exp.settings.warmup, rng)[-1]
    trace = sample_path(m, x, exp.tune_steps, rng)
    if exp.set_kind == "level":
        exp.require_thresholds()
        H = exp.importance(exp.thresholds[0])
        scores = np.array([H(row) for row in trace])
    else:
        scores = trace[:, 0]
    res = optimize_recurrency_level(scores, exp.grid)
    if res.warning:
        log.warning("no inward crossing of any grid level in %d steps", exp.tune_steps)
    print(f"best level: {_fmt(res.level)}")
    rows = [{"level": g, "crossings": int(c)} for g, c in zip(res.grid, res.counts)]
    if "json" in run.formats:
        write_json(run.path("tune_level.json"),
                   {"experiment": exp.resolved(), "level": res.level,
                    "warning": res.warning, "grid": res.grid, "counts": res.counts})
    if "csv" in run.formats:
        write_table(run.path("tune_level.csv"), ["level", "crossings"], rows)


def cmd_validate(run):
    exp = run.exp
    exp.require_thresholds()
    H = exp.importance(exp.thresholds[0])
    A = exp.recurrency_set(H)
    rng = RngStream(exp.seed, (_VALIDATE,))
    store = collect_cycles(exp.model, A, H, np.zeros(exp.model.d), exp.settings.n_rec, rng,
                           warmup=exp.settings.warmup, budget=exp.collect_budget)
    q = float(run.args.q if run.args.q is not None else exp.q)
    res = quantile_validation(store, q, rng=rng.child(1))
    verdict = "REJECT" if res.rejected else "ok"
    print(f"divergence={_fmt(res.divergence)} threshold={_fmt(res.threshold)} "
          f"p={_fmt(res.p_value)} {verdict}")
    order = np.argsort(store.h_max, kind="stable")
    top = store.origins[order[len(store) - res.n_top:]]
    rows = []
    for j in range(store.d):
        edges = np.histogram_bin_edges(store.origins[:, j], bins=30)
        ha, _ = np.histogram(store.origins[:, j], bins=edges, density=True)
        ht, _ = np.histogram(top[:, j], bins=edges, density=True)
        for b in range(len(ha)):
            rows.append({"coordinate": j + 1, "left": edges[b], "right": edges[b + 1],
                         "density_all": ha[b], "density_top": ht[b]})
    if "csv" in run.formats:
        write_table(run.path("validate_hist.csv"),
                    ["coordinate", "left", "right", "density_all", "density_top"], rows)
    if "json" in run.formats:
        write_json(run.path("validate.json"), {
            "experiment": exp.resolved(), "q": q, "n_all": res.n_all, "n_top": res.n_top,
            "ks": res.ks, "divergence": res.divergence, "threshold": res.threshold,
            "p_value": res.p_value, "rejected": res.rejected, "mean_all": res.mean_all,
            "var_all": res.var_all, "mean_top": res.mean_top, "var_top": res.var_top})


def cmd_pilot(run):
    exp = run.exp
    exp.require_thresholds()
    from .driver import _plan_from_pilot
    rows, out = [], []
    for i, u in enumerate(exp.thresholds):
        H = exp.importance(u)
        A = exp.recurrency_set(H)
        rng = RngStream(exp.seed, (_VALIDATE + 1, i))
        store = collect_cycles(exp.model, A, H, np.zeros(exp.model.d), exp.settings.n_rec, rng,
                               warmup=exp.settings.warmup, budget=exp.collect_budget)
        pilot = run_pilot_fns(exp.model, A, H, exp.settings.pilot_levels,
                              exp.settings.pilot_successes, store, rng.child(1),
                              budget=exp.settings.stage_budget)
        plan, opt, sre = _plan_from_pilot(pilot, exp.settings)
        out.append({"u": u, "pilot": pilot.to_dict(), "plan": plan.to_dict(),
                    "plan_optimum": opt.to_dict() if opt else None, "predicted_sre": sre})
        rows.append({"u": u, "p_hat": pilot.p_hat, "t_hat": pilot.t_hat,
                     "re_rplus": pilot.re_rplus, "m": plan.m, "n0": plan.factors[0]})
    run.emit("pilot", {"experiment": exp.resolved(), "results": out},
             ["u", "p_hat", "t_hat", "re_rplus", "m", "n0"], rows)


COMMANDS = {
    "estimate": cmd_estimate, "mc": cmd_mc, "oracle": cmd_oracle,
    "tune-level": cmd_tune_level, "validate": cmd_validate, "pilot": cmd_pilot,
    "compare": cmd_compare,
}


def build_parser():
    p = argparse.ArgumentParser(prog="rmsplit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="YAML or JSON experiment config")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: available cores)")
        s.add_argument("--out-dir", default=None, help="output directory")
        s.add_argument("--format", choices=["json", "csv"], default=None,
                       help="write only this format")
        if name == "validate":
            s.add_argument("--q", type=float, default=None, help="top fraction of cycles")
        if name == "compare":
            s.add_argument("--report", help="estimate JSON to compare")
            s.add_argument("--mc", help="mc JSON to compare against")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    try:
        run = _Run(args)
        COMMANDS[args.command](run)
    except ConfigError as err:
        log.error("config error: %s", err)
        return EXIT_CONFIG
    except BudgetExceededError as err:
        log.error("budget exceeded: %s", err)
        return EXIT_BUDGET
    except (RmsError, ValueError, OSError) as err:
        log.error("%s", err)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
