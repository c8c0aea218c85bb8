"""Rate fitting, Monte-Carlo coverage and certificate checks on run summaries."""
from __future__ import annotations

import math

import numpy as np


def sweep_points(summary, stat="mean"):
    """(N, gap) pairs of a budget sweep summary."""
    pts = []
    for pt in summary["points"]:
        if "N" not in pt:
            raise ValueError("rate fits need a budget sweep")
        pts.append((pt["N"], (pt["f_gap"] or {}).get(stat)))
    return pts


def rate_fit(points):
    """Least-squares fit of log(gap) on log(N).

    ``points`` is a sequence of (N, gap) pairs or a sweep summary.  Points
    with a missing or nonpositive gap are dropped and counted in ``excluded``.
    """
    if isinstance(points, dict):
        points = sweep_points(points)
    good = [(float(n), float(g)) for n, g in points if g is not None and g > 0 and math.isfinite(g)]
    excluded = len(points) - len(good)
    if len(good) < 3:
        raise ValueError(f"need at least 3 positive gaps, got {len(good)} ({excluded} excluded)")
    x = np.log([n for n, _ in good])
    y = np.log([g for _, g in good])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2, "excluded": excluded}


def coverage_threshold(alpha, trials):
    return alpha + 3.0 * math.sqrt(alpha * (1.0 - alpha) / trials)


def coverage_check(gaps, certificate, alpha, *, min_trials=100):
    """Violation rate of gap <= certificate against alpha plus three standard errors.

    ``certificate`` is a scalar or one value per trial.
    """
    g = np.asarray([math.nan if v is None else v for v in gaps], dtype=float)
    if g.size < min_trials:
        raise ValueError(f"coverage needs at least {min_trials} trials, got {g.size}")
    if np.any(np.isnan(g)):
        raise ValueError("coverage needs known optimal values for every trial")
    cert = np.broadcast_to(np.asarray(certificate, dtype=float), g.shape)
    violations = int(np.sum(g > cert))
    rate = violations / g.size
    thr = coverage_threshold(alpha, g.size)
    return {"violations": violations, "rate": rate, "threshold": thr, "pass": bool(rate <= thr)}


def _check(name, ok, detail):
    return {"check": name, "pass": bool(ok), "detail": detail}


def certify_summary(summary, rel_tol=1e-9):
    """Compare every sweep point of a run with its closed-form guarantee.

    deterministic: every trial gap within the bound (and the call bound in eps mode);
    expectation: mean gap within the bound plus two standard errors;
    lower: every trial gap strictly above eps (resisting oracle);
    confidence: left to :func:`coverage_check`.
    Saddle runs in eps mode also check the primal-dual gap.
    """
    checks = []
    for pt in summary["points"]:
        label, kind, bound = pt["label"], pt["bound_kind"], pt["bound"]
        gaps = [r["f_gap"] for r in pt["trials"]]
        if kind == "deterministic" and bound is not None:
            worst = max(gaps)
            checks.append(_check(f"{label} gap", worst <= bound * (1 + rel_tol), f"max gap {worst:.6g} vs bound {bound:.6g}"))
        elif kind == "expectation" and bound is not None:
            st = pt["f_gap"]
            lim = bound + 2.0 * st["se"]
            checks.append(_check(f"{label} mean gap", st["mean"] <= lim, f"mean {st['mean']:.6g} vs {lim:.6g}"))
        elif kind == "lower":
            worst = min(gaps)
            checks.append(_check(f"{label} lower bound", worst > bound, f"min gap {worst:.6g} vs eps {bound:.6g}"))
        cb = pt.get("calls_bound")
        if cb is not None and "eps" in pt:
            calls = pt["oracle_calls"]["max"]
            checks.append(_check(f"{label} calls", calls <= cb, f"max calls {calls:.0f} vs {cb:.6g}"))
        if "pd_gap" in pt and pt["trials"][0].get("pd_bound") is not None:
            worst = max(r["pd_gap"] - r["pd_bound"] for r in pt["trials"])
            checks.append(_check(f"{label} duality gap", worst <= 0, f"max excess {worst:.6g}"))
    return checks
