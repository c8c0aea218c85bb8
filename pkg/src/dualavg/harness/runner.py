"""Seeded execution of experiment configs and artifact persistence.

Layout of a run directory::

    config.ini                    resolved config
    traces/<label>/trial_0000.csv per-trial traces
    traces/<label>.csv            trials of one sweep point, merged in trial order
    summary.json                  per-trial finals, certificates and statistics
    timing.json                   wall times (kept apart so the rest is reproducible)

Trial t draws its noise from PCG64(SeedSequence(seed, spawn_key=(t,))), so
adding trials leaves earlier ones untouched.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
import json
import math
import os
import time

import numpy as np

from ..da_core import DAConfig, da_run, theoretical_bounds
from ..geometry import ProxFunction
from ..multistage import (
    RunParams, adaptive_bound, adaptive_certificate, adaptive_plan, budget_threshold, eps_budget_bound,
    fixed_budget_bound, run_adaptive, run_ball, run_fixed_dilation,
)
from ..primal_dual import aggregate_dual, certify_gap
from ..problems import (
    NoiseModel, hard_instance_params, make_power_objective, make_resisting_oracle, make_saddle_pnorm,
    stochastic_wrap,
)
from ..proxmap import FeasibleSet, LocalProblem, ProxSetup
from .config import ExperimentConfig, dump_config, parse_config

CSV_HEADER = "trial,stage,iter,oracle_calls,f_gap,dist_to_opt,delta_observed,delta_exact,beta,radius"


def trial_rng(seed, trial):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _vector(spec, n, Q, what):
    spec = spec.strip()
    if spec in ("", "zero"):
        return np.zeros(n)
    if spec == "center":
        return Q.center()
    if spec.startswith("e1:"):
        v = np.zeros(n)
        v[0] = float(spec[3:])
        return v
    vals = [float(t) for t in spec.replace(",", " ").split()]
    if len(vals) != n:
        raise ValueError(f"{what}: expected {n} entries, got {len(vals)}")
    return np.array(vals)


@dataclass
class Problem:
    oracle: object          # what the solver queries (possibly noisy)
    base: object            # exact objective
    setup: ProxSetup
    x0: np.ndarray
    R0: float
    hard: object = None     # hard-instance parameters for the resisting family


def build_problem(cfg: ExperimentConfig, rng=None) -> Problem:
    p, a = cfg.problem, cfg.algorithm
    lo = [float(v) for v in p.lo.replace(",", " ").split()] or None
    hi = [float(v) for v in p.hi.replace(",", " ").split()] or None
    Q = FeasibleSet(p.set, p.n, radius=p.radius, lo=lo, hi=hi)
    prox = ProxFunction(cfg.prox.kind, p.n, cfg.prox.p or None)
    setup = ProxSetup(prox, Q)
    norm = "l2" if prox.kind == "half_sq_euclid" else "l1"
    hard = None
    if p.family == "power":
        radius = p.lipschitz_radius or None
        if radius not in (None, "reach"):
            radius = float(radius)
        base = make_power_objective(p.rho, _vector(p.x_star, p.n, Q, "x_star"), Q, norm=norm, radius=radius)
    elif p.family == "saddle":
        base = make_saddle_pnorm(p.q, Q, norm=norm)
    else:
        hard = hard_instance_params(p.L, p.rho, p.radius, a.eps, p.n)
        base = make_resisting_oracle(hard, p.n)
    x0 = _vector(a.x0, p.n, Q, "x0")
    if a.R0 == "auto":
        if p.family == "resisting":
            R0 = p.radius
        elif base.x_star is None:
            raise ValueError("algorithm.R0: 'auto' needs a known minimizer")
        else:
            R0 = setup.local_norm(x0 - base.x_star)
    else:
        R0 = float(a.R0)
    if not R0 > 0:
        raise ValueError("algorithm.R0: x0 coincides with the minimizer; give R0 explicitly")
    oracle = base
    if cfg.stochastic:
        sigma = base.params.L if cfg.noise.sigma.strip() == "L" else float(cfg.noise.sigma)
        oracle = stochastic_wrap(base, NoiseModel(cfg.noise.kind, sigma), rng, setup.norm.dual_exponent)
    return Problem(oracle, base, setup, x0, R0, hard)


def guarantee(cfg: ExperimentConfig, prob: Problem):
    """Closed-form guarantee of the configured run: (bound, kind, calls_bound)."""
    a = cfg.algorithm
    params = prob.oracle.params
    prox = prob.setup.prox
    stoch = cfg.stochastic
    kind = "expectation" if stoch else "deterministic"
    if cfg.problem.family == "resisting":
        return a.eps, "lower", math.nan
    if a.scheme == "da":
        return theoretical_bounds(params, prox, prob.R0, a.N)["f_gap_bound"], kind, a.N + 1
    if a.scheme in ("ball", "fixed_dilation"):
        K = prox.C_d if a.scheme == "fixed_dilation" else prox.A_d
        L2 = params.L ** 2 + (params.sigma ** 2 if stoch else 0.0)
        if a.mode == "eps":
            return a.eps, kind, eps_budget_bound(params, prox, a.eps, const=K, L2=L2)
        if a.N < budget_threshold(params, prob.setup, prob.R0, scheme=a.scheme, L2=L2):
            r = prob.R0 if a.scheme == "fixed_dilation" else None
            single = theoretical_bounds(params, prox, prob.R0, max(a.N - 1, 0), r=r)
            return single["f_gap_bound"], kind, a.N
        return fixed_budget_bound(params, prox, a.N, const=K, L2=L2), kind, a.N
    if adaptive_plan(a.N, prob.setup, const=prox.C_d if a.scheme == "stoca" else None).fallback:
        return math.inf, kind, a.N
    if a.scheme == "adaptive":
        return adaptive_bound(params, prox, a.N), kind, a.N
    if a.scheme == "stoca":
        return adaptive_bound(params, prox, a.N, stochastic=True), kind, a.N
    if a.alpha > 0:
        return adaptive_certificate(a.N, a.alpha, params, prob.setup), "confidence", a.N
    return math.nan, "confidence", a.N


def solve(cfg: ExperimentConfig, prob: Problem, budget=None):
    """Run the configured scheme; returns (x_hat, trace)."""
    a = cfg.algorithm
    witnesses = cfg.problem.family == "saddle" and a.scheme in ("da", "ball", "fixed_dilation")
    oracle = prob.oracle
    mode, N = a.mode, a.N if budget is None else budget
    if budget is not None:
        mode = "budget"
    if a.scheme == "da":
        iters = N if budget is None else N - 1
        gamma = theoretical_bounds(oracle.params, prob.setup.prox, prob.R0, iters)["gamma_star"]
        lp = LocalProblem(prob.setup, prob.x0, prob.R0)
        x, trace, _ = da_run(oracle, lp, DAConfig(iters, gamma=gamma, record_every=a.record_every), stage=1,
                             collect_witnesses=witnesses)
        return x, trace
    if a.scheme in ("ball", "fixed_dilation"):
        rp = RunParams(oracle.params, prob.setup, prob.x0, prob.R0, mode=mode, eps=a.eps or None,
                       N=N if mode == "budget" else None, scheme=a.scheme, stochastic=cfg.stochastic,
                       record_every=a.record_every, collect_witnesses=witnesses)
        return (run_ball if a.scheme == "ball" else run_fixed_dilation)(oracle, rp)
    sigma = oracle.params.sigma if cfg.stochastic else 0.0
    x, trace, _ = run_adaptive(oracle, N, prob.setup, oracle.params.L, prob.R0, prob.x0, variant=a.scheme,
                               sigma=sigma, record_every=a.record_every)
    return x, trace


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def run_trial(cfg: ExperimentConfig, trial: int):
    """One seeded trial; returns (csv_rows, record)."""
    rng = trial_rng(cfg.noise.seed, trial)
    prob = build_problem(cfg, rng)
    budget = prob.hard.M if prob.hard is not None else None
    x_hat, trace = solve(cfg, prob, budget)
    calls = prob.oracle.calls
    if calls != trace.oracle_calls:
        raise RuntimeError(f"oracle counter {calls} disagrees with the trace ({trace.oracle_calls})")
    base = prob.base
    bound, kind, calls_bound = guarantee(cfg, prob)
    rec = {"trial": trial, "oracle_calls": calls, "stages": len(trace.stages), "bound": _num(bound),
           "bound_kind": kind, "calls_bound": _num(calls_bound),
           "delta_observed": _num(trace.stages[-1].delta_observed),
           "delta_exact": _num(trace.stages[-1].delta_exact)}
    if prob.hard is not None:
        inst = base.frozen_instance()
        ref = base.comparison_point(prob.hard.lam)
        rec["f_gap"] = _num(inst.value(x_hat) - inst.value(ref))
        rec["dist_to_opt"] = None
        rec["M"] = prob.hard.M
    else:
        rec["f_gap"] = _num(base.value(x_hat) - base.f_star)
        rec["dist_to_opt"] = _num(prob.setup.local_norm(x_hat - base.x_star))
    if cfg.problem.family == "saddle" and trace.stages[-1].witness_mean is not None:
        w_bar = aggregate_dual(trace).w_bar
        eps = cfg.algorithm.eps if cfg.algorithm.mode == "eps" else math.nan
        pd = certify_gap(x_hat, w_bar, base, eps, base.params.rho)
        rec["pd_gap"] = pd["gap"]
        rec["pd_bound"] = _num(pd["bound"])
    rows = [(trial, it.stage, it.iter, it.oracle_calls, it.f_gap, it.dist_to_opt, it.delta_observed,
             it.delta_exact, it.beta, it.radius) for it in trace.iterations]
    return rows, rec


def _cell(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else "%.17g" % v


def format_rows(rows):
    return "".join(",".join(_cell(v) for v in row) + "\n" for row in rows)


def _label(cfg: ExperimentConfig):
    if cfg.sweep_key == "eps":
        return f"eps{cfg.algorithm.eps!r}"
    return f"N{cfg.algorithm.N}"


def _trial_job(job):
    text, value, trial, path = job
    cfg = parse_config(text)
    if value is not None:
        cfg = cfg.at(value)
    t0 = time.perf_counter()
    rows, rec = run_trial(cfg, trial)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_HEADER + "\n" + format_rows(rows))
    return rec, time.perf_counter() - t0


def _stats(values):
    x = np.array([v for v in values if v is not None], dtype=float)
    if x.size == 0:
        return {}
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    q = np.quantile(x, [0.05, 0.5, 0.95])
    return {"mean": float(x.mean()), "se": se, "min": float(x.min()), "max": float(x.max()),
            "q05": float(q[0]), "q50": float(q[1]), "q95": float(q[2]), "count": int(x.size)}


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


def run_experiment(cfg: ExperimentConfig, out_dir=None, *, workers=1, sweep=False):
    """Run every trial (of every sweep point when ``sweep``) and write the artifacts.

    Returns the summary dictionary that is also written to summary.json.
    """
    out_dir = out_dir or cfg.run.out
    values = list(cfg.run.sweep) if sweep else [None]
    if sweep and not values:
        raise ValueError("run.sweep: empty sweep")
    os.makedirs(os.path.join(out_dir, "traces"), exist_ok=True)
    text = dump_config(replace(cfg, run=replace(cfg.run, out="")))
    with open(os.path.join(out_dir, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(text)
    points, timing = [], {}
    for value in values:
        pcfg = cfg if value is None else cfg.at(value)
        label = _label(pcfg)
        tdir = os.path.join(out_dir, "traces", label)
        os.makedirs(tdir, exist_ok=True)
        jobs = [(text, value, t, os.path.join(tdir, f"trial_{t:04d}.csv")) for t in range(cfg.run.trials)]
        t0 = time.perf_counter()
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(_trial_job, jobs))
        else:
            results = [_trial_job(j) for j in jobs]
        wall = time.perf_counter() - t0
        with open(os.path.join(out_dir, "traces", f"{label}.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for _, _, _, path in jobs:
                with open(path, encoding="utf-8") as part:
                    fh.write(part.read().split("\n", 1)[1])
        recs = [r for r, _ in results]
        point = {"label": label, pcfg.sweep_key: pcfg.point_value(), "trials": recs,
                 "f_gap": _stats(r["f_gap"] for r in recs),
                 "oracle_calls": _stats(r["oracle_calls"] for r in recs),
                 "bound": recs[0]["bound"], "bound_kind": recs[0]["bound_kind"],
                 "calls_bound": recs[0]["calls_bound"]}
        if "pd_gap" in recs[0]:
            point["pd_gap"] = _stats(r["pd_gap"] for r in recs)
        points.append(point)
        timing[label] = {"wall_seconds": wall, "trial_seconds": [s for _, s in results]}
    summary = {"config": asdict(cfg), "sweep": bool(sweep), "points": points}
    summary["config"]["run"]["out"] = ""
    _dump_json(summary, os.path.join(out_dir, "summary.json"))
    _dump_json(timing, os.path.join(out_dir, "timing.json"))
    return summary


def load_summary(run_dir):
    with open(os.path.join(run_dir, "summary.json"), encoding="utf-8") as fh:
        return json.load(fh)
