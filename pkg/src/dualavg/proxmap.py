"""Prox-mappings, the value function V and support functions on Q ∩ B_R(z).

For a local problem (z, R, beta) and a dual vector s the prox-mapping is

    pi(s) = argmax { <s, x - z> - beta * d((x - z)/R) : x in Q, ||x - z|| <= R }

and V(s) is the corresponding optimal value.  Supported (prox, set) pairs:

=================  =====================================================
half_sq_euclid     full, euclidean_ball, box, simplex, l1_ball
entropy_sym        full, simplex, l1_ball
pnorm_sq           full
=================  =====================================================

The entropy cases are solved in the variables h = (x - z)/R = u - v of the
symmetrized entropy.  Dualizing the coupling constraints leaves independent
two-variable problems per coordinate (see :func:`solve_2d_entropy`); the
multipliers are found by nested scalar root finding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.special import logsumexp

from .geometry import FEAS_TOL, ProxFunction, lp_norm, prox_value, conjugate_exponent

SET_KINDS = ("full", "euclidean_ball", "simplex", "l1_ball", "box")

SUPPORTED = {
    "half_sq_euclid": ("full", "euclidean_ball", "box", "simplex", "l1_ball"),
    "entropy_sym": ("full", "simplex", "l1_ball"),
    "pnorm_sq": ("full",),
}

LOG_MIN = math.log(1e-300)
LOG_MAX = 700.0
MAX_EXPANSIONS = 1000
ROOT_XTOL = 1e-13
ROOT_MAXITER = 200


class ProxSolverError(RuntimeError):
    """Inner root finding failed (no bracket or no convergence)."""


class UnsupportedGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class FeasibleSet:
    """A simple closed convex set Q in R^n.

    ``radius`` is used by the balls, ``lo``/``hi`` by the box.  Balls are
    centered at the origin.
    """

    kind: str
    n: int
    radius: float = 1.0
    lo: tuple | None = None
    hi: tuple | None = None

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.kind == "box":
            if self.lo is None or self.hi is None:
                raise ValueError("box needs lo and hi")
            lo = tuple(float(v) for v in np.broadcast_to(self.lo, (self.n,)))
            hi = tuple(float(v) for v in np.broadcast_to(self.hi, (self.n,)))
            if any(a > b for a, b in zip(lo, hi)):
                raise ValueError("box needs lo <= hi")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            return False
        k = self.kind
        if k == "full":
            return bool(np.all(np.isfinite(x)))
        if k == "euclidean_ball":
            return float(np.linalg.norm(x)) <= self.radius + tol
        if k == "l1_ball":
            return float(np.abs(x).sum()) <= self.radius + tol
        if k == "simplex":
            return bool(x.min() >= -tol and abs(x.sum() - 1.0) <= tol)
        return bool(np.all(x >= np.asarray(self.lo) - tol) and np.all(x <= np.asarray(self.hi) + tol))

    def project(self, y):
        """Euclidean projection onto Q."""
        y = np.asarray(y, dtype=float)
        k = self.kind
        if k == "full":
            return y.copy()
        if k == "euclidean_ball":
            nrm = float(np.linalg.norm(y))
            return y * (self.radius / nrm) if nrm > self.radius else y.copy()
        if k == "box":
            return np.clip(y, self.lo, self.hi)
        if k == "simplex":
            return project_simplex(y)
        if float(np.abs(y).sum()) <= self.radius:
            return y.copy()
        return np.sign(y) * project_simplex(np.abs(y), self.radius)

    def diameter(self, norm_kind="l2"):
        """Diameter of Q in the l2 or l1 norm (inf for the full space)."""
        k = self.kind
        l1 = norm_kind == "l1"
        if k == "full":
            return math.inf
        if k == "euclidean_ball":
            return 2 * self.radius * (math.sqrt(self.n) if l1 else 1.0)
        if k == "l1_ball":
            return 2 * self.radius
        if k == "simplex":
            return 2.0 if l1 else math.sqrt(2.0)
        width = np.asarray(self.hi) - np.asarray(self.lo)
        return float(width.sum() if l1 else np.linalg.norm(width))

    def center(self):
        """A canonical interior-ish point of Q."""
        if self.kind == "simplex":
            return np.full(self.n, 1.0 / self.n)
        if self.kind == "box":
            return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))
        return np.zeros(self.n)


def project_simplex(y, total=1.0):
    """Euclidean projection onto {x >= 0, sum x = total} (sort-based)."""
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    ind = np.arange(1, y.size + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    theta = css[rho - 1] / rho
    return np.maximum(y - theta, 0.0)


@dataclass(frozen=True)
class ProxSetup:
    """A prox-function together with the feasible set it is used on."""

    prox: ProxFunction
    Q: FeasibleSet

    def __post_init__(self):
        if self.prox.n != self.Q.n:
            raise ValueError("prox and set dimensions differ")
        if self.Q.kind not in SUPPORTED[self.prox.kind]:
            raise UnsupportedGeometryError(
                f"prox {self.prox.kind!r} is not supported on set {self.Q.kind!r}")

    @property
    def norm(self):
        return self.prox.norm

    @property
    def n(self):
        return self.Q.n

    def local_norm(self, x):
        return lp_norm(x, self.norm.primal_exponent)

    def dual_norm(self, s):
        return lp_norm(s, self.norm.dual_exponent)


@dataclass(frozen=True)
class LocalProblem:
    """The set Q_R(z) = Q ∩ B_R(z) with prox-function d((x - z)/R) and gain beta."""

    setup: ProxSetup
    z: np.ndarray = field(repr=False)
    R: float
    beta: float = 1.0

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if not self.setup.Q.contains(z):
            raise ValueError("prox-center must lie in Q")
        if self.R < 0 or self.beta <= 0:
            raise ValueError("need R >= 0 and beta > 0")
        object.__setattr__(self, "z", z)

    def with_beta(self, beta):
        return LocalProblem(self.setup, self.z, self.R, beta)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return self.setup.Q.contains(x, tol) and self.setup.local_norm(x - self.z) <= self.R * (1 + tol) + tol

    def d_local(self, x):
        """d_{z,R}(x)."""
        return prox_value(self.setup.prox, (np.asarray(x, dtype=float) - self.z) / self.R)


# ---------------------------------------------------------------------------
# two-variable entropy subproblem


def solve_2d_entropy(s, t, z):
    """Minimize s*u + t*v + u ln u + v ln v subject to u >= v - z.

    The equality-constrained pair (u = v - z) is accepted when the difference
    of partial derivatives there is positive, otherwise the unconstrained
    minimizer (e^{-1-s}, e^{-1-t}) is returned.  Works elementwise on arrays.
    Results are clamped below at 1e-300.
    """
    u, v, _, _ = _solve_2d_entropy_log(s, t, z)
    return u, v


def _solve_2d_entropy_log(s, t, z):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    log_c = -2.0 - s - t
    sqrt_c = np.exp(np.clip(0.5 * log_c, LOG_MIN, LOG_MAX))
    az = np.abs(z)
    big = 0.5 * (np.hypot(z, 2.0 * sqrt_c) + az)
    log_big = np.log(big)
    log_small = log_c - log_big
    log_ub = np.where(z >= 0, log_small, log_big)
    log_vb = np.where(z >= 0, log_big, log_small)
    # partial derivatives of the objective at (u_bar, v_bar); their sum is zero
    # by construction, their difference is twice the constraint multiplier
    active = (s + log_ub) - (t + log_vb) > 0
    log_u = np.where(active, log_ub, -1.0 - s)
    log_v = np.where(active, log_vb, -1.0 - t)
    log_u = np.clip(log_u, LOG_MIN, LOG_MAX)
    log_v = np.clip(log_v, LOG_MIN, LOG_MAX)
    return np.exp(log_u), np.exp(log_v), log_u, log_v


def _entropy_objective(s, t, u, v, log_u, log_v):
    return s * u + t * v + u * log_u + v * log_v


# ---------------------------------------------------------------------------
# scalar root finding on monotone residuals


def _bracket(fun, lo, hi, *, lower_bound=None):
    """Expand [lo, hi] until a decreasing ``fun`` changes sign on it."""
    flo, fhi = fun(lo), fun(hi)
    width = hi - lo
    for _ in range(MAX_EXPANSIONS):
        if flo >= 0 >= fhi:
            return lo, hi, flo, fhi
        width *= 2.0
        if flo < 0:
            hi, fhi = lo, flo
            lo = lo - width
            if lower_bound is not None and lo <= lower_bound:
                lo = lower_bound
            flo = fun(lo)
            if lower_bound is not None and lo == lower_bound and flo < 0:
                break
        else:
            lo, flo = hi, fhi
            hi = hi + width
            fhi = fun(hi)
    raise ProxSolverError(f"could not bracket multiplier root (f(lo)={flo!r}, f(hi)={fhi!r})")


def _root(fun, lo, hi, *, lower_bound=None):
    lo, hi, flo, fhi = _bracket(fun, lo, hi, lower_bound=lower_bound)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    try:
        return brentq(fun, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=ROOT_MAXITER)
    except RuntimeError as exc:  # pragma: no cover - brentq convergence failure
        raise ProxSolverError(str(exc)) from exc


@dataclass
class DualSolveInfo:
    lam: float
    mu: float
    residuals: dict
    dual_gap: float


def simplex_prox_dual(lp: LocalProblem, s, return_info=False):
    """Entropy prox-mapping on the simplex by dual decomposition.

    With a = R s / beta and zeta = z / R the maximization becomes

        min  sum_i -a_i (u_i - v_i) + psi(u_i) + psi(v_i)
        s.t. sum_i (u_i + v_i) = 1,  sum_i (u_i - v_i) = 0,  u_i >= v_i - zeta_i.

    The multiplier ``mu`` of the second constraint is found for each ``lam``
    (multiplier of the first) and ``lam`` is found in an outer search.
    """
    if lp.setup.Q.kind != "simplex" or lp.setup.prox.kind != "entropy_sym":
        raise UnsupportedGeometryError("simplex_prox_dual needs entropy_sym on the simplex")
    s = np.asarray(s, dtype=float)
    if lp.R <= 0:
        return (lp.z.copy(), None) if return_info else lp.z.copy()
    a = lp.R * s / lp.beta
    zeta = lp.z / lp.R

    def coords(lam, mu):
        return _solve_2d_entropy_log(-a + lam + mu, a + lam - mu, zeta)

    # multipliers of the problem without the sign constraints seed the brackets
    mu0 = 0.5 * (logsumexp(a) - logsumexp(-a))
    lam0 = logsumexp(np.concatenate([a - mu0, mu0 - a])) - 1.0

    def mu_star(lam):
        def diff(mu):
            u, v, _, _ = coords(lam, mu)
            return float(np.sum(u - v))
        return _root(diff, mu0 - 0.5, mu0 + 0.5)

    def mass(lam):
        u, v, _, _ = coords(lam, mu_star(lam))
        return float(np.sum(u + v)) - 1.0

    lam = _root(mass, lam0 - 0.5, lam0 + 0.5)
    mu = mu_star(lam)
    u, v, lu, lv = coords(lam, mu)
    x = lp.z + lp.R * (u - v)
    x = np.maximum(x, 0.0)
    x /= x.sum()
    if not return_info:
        return x
    res = {"mass": float(np.sum(u + v)) - 1.0, "affine": float(x.sum()) - 1.0,
           "sum_h": float(np.sum(u - v))}
    gap = abs(lam * res["mass"]) + abs(mu * res["sum_h"])
    return x, DualSolveInfo(lam, mu, res, gap)


def hyperoct_prox_dual(lp: LocalProblem, s, return_info=False):
    """Entropy prox-mapping on the l1 ball {||x||_1 <= r} by dual decomposition.

    The ball constraint sum_i |zeta_i + u_i - v_i| <= r/R gets a multiplier
    ``kappa >= 0``.  Per coordinate the absolute value splits into the two
    cases zeta + u - v >= 0 and <= 0, each a two-variable entropy problem; the
    cheaper branch wins (ties go to the nonnegative branch).
    """
    if lp.setup.Q.kind != "l1_ball" or lp.setup.prox.kind != "entropy_sym":
        raise UnsupportedGeometryError("hyperoct_prox_dual needs entropy_sym on the l1 ball")
    s = np.asarray(s, dtype=float)
    if lp.R <= 0:
        return (lp.z.copy(), None) if return_info else lp.z.copy()
    a = lp.R * s / lp.beta
    zeta = lp.z / lp.R
    budget = lp.setup.Q.radius / lp.R
    n = a.size
    amax = float(np.abs(a).max(initial=0.0))

    def coords(lam, kappa):
        sp, tp = -a + lam, a + lam
        u1, v1, lu1, lv1 = _solve_2d_entropy_log(sp + kappa, tp - kappa, zeta)
        o1 = _entropy_objective(sp + kappa, tp - kappa, u1, v1, lu1, lv1) + kappa * zeta
        v2, u2, lv2, lu2 = _solve_2d_entropy_log(tp + kappa, sp - kappa, -zeta)
        o2 = _entropy_objective(tp + kappa, sp - kappa, v2, u2, lv2, lu2) - kappa * zeta
        first = o1 <= o2
        return np.where(first, u1, u2), np.where(first, v1, v2)

    def kappa_star(lam):
        def excess(kappa):
            u, v = coords(lam, kappa)
            return float(np.abs(zeta + u - v).sum()) - budget
        if excess(0.0) <= 0:
            return 0.0
        return _root(excess, 0.0, amax + 1.0, lower_bound=0.0)

    def mass(lam):
        u, v = coords(lam, kappa_star(lam))
        return float(np.sum(u + v)) - 1.0

    lam0 = amax + math.log(2 * n) - 1.0
    lam = _root(mass, lam0 - 2.0, lam0 + 2.0)
    kappa = kappa_star(lam)
    u, v = coords(lam, kappa)
    x = lp.z + lp.R * (u - v)
    l1 = float(np.abs(x).sum())
    r = lp.setup.Q.radius
    if l1 > r:
        x *= r / l1
    if not return_info:
        return x
    res = {"mass": float(np.sum(u + v)) - 1.0, "ball": max(l1 - r, 0.0) / max(r, 1.0),
           "slack": r - l1}
    gap = abs(lam * res["mass"]) + abs(kappa * (l1 - r) / lp.R)
    return x, DualSolveInfo(lam, kappa, res, gap)


def _entropy_full_space(lp, s):
    a = lp.R * np.asarray(s, dtype=float) / lp.beta
    m = float(np.abs(a).max(initial=0.0))
    eu, ev = np.exp(a - m), np.exp(-a - m)
    Z = float(eu.sum() + ev.sum())
    return lp.z + lp.R * (eu - ev) / Z


def _q_gradient(b, q):
    """Gradient of 0.5 ||b||_q^2 (the inverse of the gradient map of 0.5 ||.||_p^2)."""
    nrm = lp_norm(b, q)
    if nrm == 0:
        return np.zeros_like(b)
    return nrm * np.sign(b) * (np.abs(b) / nrm) ** (q - 1.0)


def _pnorm_full_space(lp, s):
    a = lp.R * np.asarray(s, dtype=float) / lp.beta
    q = conjugate_exponent(lp.setup.prox.p)

    def h_of(theta):
        return _q_gradient(np.sign(a) * np.maximum(np.abs(a) - theta, 0.0), q)

    h = h_of(0.0)
    if np.abs(h).sum() > 1.0:
        theta = _root(lambda th: float(np.abs(h_of(th)).sum()) - 1.0,
                      0.0, float(np.abs(a).max()), lower_bound=0.0)
        h = h_of(theta)
        l1 = float(np.abs(h).sum())
        if l1 > 1.0:
            h /= l1
    return lp.z + lp.R * h


# ---------------------------------------------------------------------------
# Euclidean geometry


def _l2(v):
    return math.sqrt(float(v @ v))


def _radial_clip(y, c, r):
    d = y - c
    nrm = _l2(d)
    return c + d * (r / nrm) if nrm > r else y.copy()


def _two_ball_circle(c1, r1, c2, r2):
    """Center, radius and unit normal of the sphere where two ball boundaries meet."""
    diff = c2 - c1
    dist = float(np.linalg.norm(diff))
    nu = diff / dist
    a = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist)
    rad = math.sqrt(max(r1 * r1 - a * a, 0.0))
    return c1 + a * nu, rad, nu


def _orthogonal_unit(nu):
    e = np.zeros_like(nu)
    e[int(np.argmin(np.abs(nu)))] = 1.0
    w = e - (e @ nu) * nu
    return w / np.linalg.norm(w)


def project_two_balls(y, c1, r1, c2, r2, tol=1e-12):
    """Euclidean projection onto B(c1, r1) ∩ B(c2, r2) (assumed nonempty)."""
    y = np.asarray(y, dtype=float)
    p1 = _radial_clip(y, c1, r1)
    if _l2(p1 - c2) <= r2 * (1 + tol):
        return p1
    p2 = _radial_clip(y, c2, r2)
    if _l2(p2 - c1) <= r1 * (1 + tol):
        return p2
    c, rad, nu = _two_ball_circle(c1, r1, c2, r2)
    w = (y - c) - ((y - c) @ nu) * nu
    wn = _l2(w)
    direction = w / wn if wn > 0 else _orthogonal_unit(nu)
    return c + rad * direction


def _project_intersection(Q: FeasibleSet, z, R, y):
    """Euclidean projection of y onto Q ∩ B_2(z, R)."""
    if Q.kind == "full":
        return _radial_clip(y, z, R)
    if Q.kind == "euclidean_ball":
        return project_two_balls(y, np.zeros(Q.n), Q.radius, z, R)
    x0 = Q.project(y)
    if _l2(x0 - z) <= R:
        return x0

    def excess(theta):
        return _l2(Q.project((y + theta * z) / (1.0 + theta)) - z) - R

    theta = _root(excess, 0.0, 1.0, lower_bound=0.0)
    x = Q.project((y + theta * z) / (1.0 + theta))
    return _radial_clip(x, z, R)


def prox_map(lp: LocalProblem, s):
    """pi_{z,R,beta}(s)."""
    s = np.asarray(s, dtype=float)
    if s.shape != lp.z.shape:
        raise ValueError("dimension mismatch between s and the prox-center")
    if lp.R <= 0:
        return lp.z.copy()
    kind, qk = lp.setup.prox.kind, lp.setup.Q.kind
    if kind == "half_sq_euclid":
        return _project_intersection(lp.setup.Q, lp.z, lp.R, lp.z + (lp.R ** 2 / lp.beta) * s)
    if kind == "entropy_sym":
        if qk == "full":
            return _entropy_full_space(lp, s)
        if qk == "simplex":
            return simplex_prox_dual(lp, s)
        return hyperoct_prox_dual(lp, s)
    return _pnorm_full_space(lp, s)


def v_value(lp: LocalProblem, s):
    """V_{z,R,beta}(s), the optimal value attained at the prox-mapping."""
    s = np.asarray(s, dtype=float)
    if lp.R <= 0:
        return 0.0
    x = prox_map(lp, s)
    return float(s @ (x - lp.z)) - lp.beta * lp.d_local(x)


def v_gradient_lipschitz_check(lp: LocalProblem, s1, s2, tol=1e-9):
    """||pi(s1) - pi(s2)|| <= R^2/(beta mu_d) ||s1 - s2||_*  (pi = z + V')."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    lhs = lp.setup.local_norm(prox_map(lp, s1) - prox_map(lp, s2))
    rhs = lp.R ** 2 / (lp.beta * lp.setup.prox.mu_d) * lp.setup.dual_norm(s1 - s2)
    return lhs <= rhs * (1 + tol) + tol


# ---------------------------------------------------------------------------
# support functions


def support(setup: ProxSetup, z, R, s):
    """max{<s, x - z> : x in Q ∩ B_R(z)} and a maximizer, computed exactly.

    The ball is taken in the norm of the prox-function of ``setup``.
    """
    if setup.prox.is_l1:
        return support_l1(setup.Q, z, R, s)
    return support_l2(setup.Q, z, R, s)


def support_l1(Q: FeasibleSet, z, R, s):
    """Support function of Q ∩ {||x - z||_1 <= R} at s, with a maximizer."""
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    if R <= 0 or not np.any(s):
        return 0.0, z.copy()
    if Q.kind == "full":
        x = _support_l1_full(z, R, s)
    elif Q.kind == "simplex":
        x = _support_l1_simplex(z, R, s)
    elif Q.kind == "box":
        x = _support_l1_box(Q, z, R, s)
    elif Q.kind == "l1_ball":
        x = _support_l1_l1ball(Q, z, R, s)
    else:
        raise UnsupportedGeometryError(f"no exact l1 support on {Q.kind!r}")
    return float(s @ (x - z)), x


def support_l2(Q: FeasibleSet, z, R, s):
    """Support function of Q ∩ {||x - z||_2 <= R} at s, with a maximizer."""
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    if R <= 0 or not np.any(s):
        return 0.0, z.copy()
    if Q.kind == "full":
        x = z + R * s / np.linalg.norm(s)
    elif Q.kind == "euclidean_ball":
        x = _support_two_balls(s, np.zeros(Q.n), Q.radius, z, R)
    else:
        x = _support_l2_generic(Q, z, R, s)
    return float(s @ (x - z)), x


def _support_l1_full(z, R, s):
    j = int(np.argmax(np.abs(s)))
    x = z.copy()
    x[j] += R * np.sign(s[j])
    return x


def _support_l1_simplex(z, R, s):
    # moving mass m from coordinate i to j changes the l1 distance by 2m
    j = int(np.argmax(s))
    budget = 0.5 * R
    x = z.copy()
    for i in np.argsort(s, kind="stable"):
        if budget <= 0 or s[i] >= s[j]:
            break
        move = min(x[i], budget)
        x[i] -= move
        x[j] += move
        budget -= move
    return x


def _support_l1_box(Q, z, R, s):
    lo, hi = np.asarray(Q.lo), np.asarray(Q.hi)
    x = z.copy()
    budget = R
    for i in np.argsort(-np.abs(s), kind="stable"):
        if budget <= 0 or s[i] == 0:
            break
        room = (hi[i] - z[i]) if s[i] > 0 else (z[i] - lo[i])
        move = min(room, budget)
        x[i] += np.sign(s[i]) * move
        budget -= move
    return x


def _support_l1_l1ball(Q, z, R, s):
    # variables [h+, h-, p+, p-] with z + h+ - h- = p+ - p-
    n = z.size
    eye = np.eye(n)
    c = np.concatenate([-s, s, np.zeros(2 * n)])
    A_ub = np.vstack([np.concatenate([np.ones(2 * n), np.zeros(2 * n)]),
                      np.concatenate([np.zeros(2 * n), np.ones(2 * n)])])
    b_ub = np.array([R, Q.radius])
    A_eq = np.hstack([eye, -eye, -eye, eye])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=-z, bounds=(0, None), method="highs")
    if res.status != 0:
        raise ProxSolverError(f"support LP failed: {res.message}")
    h = res.x[:n] - res.x[n:2 * n]
    return z + h


def _support_two_balls(s, c1, r1, c2, r2, tol=1e-12):
    sh = s / np.linalg.norm(s)
    q1 = c1 + r1 * sh
    if np.linalg.norm(q1 - c2) <= r2 * (1 + tol):
        return q1
    q2 = c2 + r2 * sh
    if np.linalg.norm(q2 - c1) <= r1 * (1 + tol):
        return q2
    c, rad, nu = _two_ball_circle(c1, r1, c2, r2)
    w = s - (s @ nu) * nu
    wn = float(np.linalg.norm(w))
    return c + rad * (w / wn) if wn > 0 else c


def _support_l2_generic(Q, z, R, s):
    """Linear maximization over Q ∩ B_2(z, R) through x(t) = P_Q(z + t s).

    ||x(t) - z|| is nondecreasing in t; either the ball becomes active at some
    t (found by root finding) or x(t) settles on the maximizing face of Q.
    """
    def x_of(t):
        return Q.project(z + t * s)

    t = 1.0 / max(float(np.linalg.norm(s)), 1e-300)
    prev = x_of(t)
    for _ in range(MAX_EXPANSIONS):
        if np.linalg.norm(prev - z) >= R:
            break
        nxt = x_of(2 * t)
        if np.allclose(nxt, prev, rtol=0, atol=1e-15):
            return prev
        t, prev = 2 * t, nxt
    else:  # pragma: no cover
        raise ProxSolverError("support search did not settle")
    root = brentq(lambda tt: float(np.linalg.norm(x_of(tt) - z)) - R, 0.0, t,
                  xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=ROOT_MAXITER)
    return _radial_clip(x_of(root), z, R)
