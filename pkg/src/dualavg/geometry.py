"""Norms, dual norms and prox-functions of the primal unit ball.

Three prox-function families are provided, each paired with the norm in which
its strong-convexity modulus is certified:

* ``"half_sq_euclid"``  d(x) = ||x||_2^2 / 2 with the l2 norm,
* ``"pnorm_sq"``        d(x) = ||x||_p^2 / 2 with the l1 norm,
* ``"entropy_sym"``     the symmetrized entropy of the l1 ball with the l1 norm.

For the last one, d(x) is the optimal value of

    min  sum_i psi(u_i) + psi(v_i) + ln(2n)
    s.t. u - v = x,  u, v >= 0,  sum_i (u_i + v_i) = 1,

with psi(t) = t ln t and psi(0) = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq

FEAS_TOL = 1e-10

NORM_KINDS = ("l1", "l2", "lp")
PROX_KINDS = ("half_sq_euclid", "pnorm_sq", "entropy_sym")


class DimensionError(ValueError):
    pass


class InfeasiblePointError(ValueError):
    pass


def _check_dim(v, n):
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise DimensionError(f"expected a vector of dimension {n}, got shape {v.shape}")
    return v


def lp_norm(x, p):
    """||x||_p, evaluated with a max-rescaling so that large p does not overflow."""
    x = np.abs(np.asarray(x, dtype=float))
    if p == 1:
        return float(x.sum())
    if p == 2:
        return float(np.sqrt(x @ x))
    if math.isinf(p):
        return float(x.max(initial=0.0))
    m = x.max(initial=0.0)
    if m == 0.0:
        return 0.0
    return float(m * np.sum((x / m) ** p) ** (1.0 / p))


def conjugate_exponent(p):
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class NormPair:
    """A primal norm on R^n together with its dual norm.

    ``kind`` is one of ``"l1"``, ``"l2"``, ``"lp"``; ``p`` is required for ``"lp"``.
    """

    kind: str
    n: int
    p: float | None = None

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if self.kind == "lp" and (self.p is None or self.p <= 1):
            raise ValueError("lp norm needs p > 1")

    @property
    def primal_exponent(self):
        return {"l1": 1.0, "l2": 2.0}.get(self.kind, self.p)

    @property
    def dual_exponent(self):
        return conjugate_exponent(self.primal_exponent)


def norm(pair: NormPair, x) -> float:
    return lp_norm(_check_dim(x, pair.n), pair.primal_exponent)


def dual_norm(pair: NormPair, s) -> float:
    return lp_norm(_check_dim(s, pair.n), pair.dual_exponent)


def prox_constants(kind, n, p=None):
    """Return ``(mu_d, A_d, C_d)`` for a prox-function family.

    ``C_d`` is ``None`` when d has no quadratic growth (entropy).  For
    ``"pnorm_sq"`` the modulus with respect to l1 is (p-1) n^{2(1-p)/p}; the
    default exponent is p = min(2, 1 + 1/ln n).
    """
    if kind == "half_sq_euclid":
        return 1.0, 0.5, 0.5
    if n < 2:
        raise ValueError(f"{kind} needs n >= 2")
    if kind == "entropy_sym":
        return 0.5, math.log(2 * n), None
    if kind == "pnorm_sq":
        p = default_p(n) if p is None else p
        if not 1 < p <= 2:
            raise ValueError("pnorm_sq needs 1 < p <= 2")
        return (p - 1.0) * n ** (2.0 * (1.0 - p) / p), 0.5, 0.5
    raise ValueError(f"unknown prox kind {kind!r}")


def default_p(n):
    """1 + 1/ln n, capped at 2 for the smallest dimensions."""
    return min(2.0, 1.0 + 1.0 / math.log(n))


@dataclass(frozen=True)
class ProxFunction:
    """Prox-function d of the unit ball of ``norm`` with certified constants."""

    kind: str
    n: int
    p: float | None = None
    mu_d: float = field(init=False)
    A_d: float = field(init=False)
    C_d: float | None = field(init=False)

    def __post_init__(self):
        if self.kind not in PROX_KINDS:
            raise ValueError(f"unknown prox kind {self.kind!r}")
        p = self.p
        if self.kind == "pnorm_sq" and p is None:
            p = default_p(self.n)
            object.__setattr__(self, "p", p)
        mu, A, C = prox_constants(self.kind, self.n, p)
        object.__setattr__(self, "mu_d", mu)
        object.__setattr__(self, "A_d", A)
        object.__setattr__(self, "C_d", C)

    @property
    def norm(self) -> NormPair:
        if self.kind == "half_sq_euclid":
            return NormPair("l2", self.n)
        return NormPair("l1", self.n)

    @property
    def is_l1(self):
        return self.kind != "half_sq_euclid"


def _psi_sum(t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    return float(np.sum(t[pos] * np.log(t[pos])))


def entropy_decomposition(h):
    """Optimal (u, v) in the definition of the symmetrized entropy at h.

    Stationarity gives u_i v_i = c^2 for a common c >= 0, so that
    u_i + v_i = sqrt(h_i^2 + 4c^2); c is fixed by sum_i (u_i + v_i) = 1.
    """
    h = np.asarray(h, dtype=float)
    n = h.size
    l1 = float(np.abs(h).sum())
    if l1 > 1.0 + FEAS_TOL:
        raise InfeasiblePointError(f"||x||_1 = {l1!r} exceeds 1")
    if l1 > 1.0:
        h = h / l1
        l1 = 1.0
    if l1 >= 1.0 - 1e-15:
        return np.maximum(h, 0.0), np.maximum(-h, 0.0)

    def excess(c):
        return float(np.sum(np.hypot(h, 2.0 * c))) - 1.0

    c = brentq(excess, 0.0, 1.0 / (2 * n), xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    total = np.hypot(h, 2.0 * c)
    big = 0.5 * (np.abs(h) + total)
    small = np.where(big > 0, c * c / np.where(big > 0, big, 1.0), 0.0)
    u = np.where(h >= 0, big, small)
    v = np.where(h >= 0, small, big)
    return u, v


def prox_value(d: ProxFunction, x) -> float:
    """d(x); for the entropy x must lie in the unit l1 ball (up to 1e-10)."""
    x = _check_dim(x, d.n)
    if d.kind == "half_sq_euclid":
        return 0.5 * float(x @ x)
    if d.kind == "pnorm_sq":
        return 0.5 * lp_norm(x, d.p) ** 2
    u, v = entropy_decomposition(x)
    val = _psi_sum(u) + _psi_sum(v) + math.log(2 * d.n)
    # exact zero at the prox-center; the formula leaves a rounding residue there
    return max(val, 0.0)


def midpoint_modulus_holds(f, x, y, modulus, norm_fn, tol=1e-9):
    """Midpoint form of strong convexity:
    f((x+y)/2) <= (f(x)+f(y))/2 - modulus/8 * ||x-y||^2 (+ tol)."""
    lhs = f(0.5 * (x + y))
    rhs = 0.5 * (f(x) + f(y)) - modulus / 8.0 * norm_fn(x - y) ** 2
    return lhs <= rhs + tol


def _zoom_minimize(obj, center, half_width, points=21, levels=40, shrink=0.5):
    """Derivative-free minimization of a vectorized objective by grid zooming.

    ``obj`` maps an (m, k) array to m values, +inf where infeasible.
    """
    center = np.asarray(center, dtype=float)
    k = center.size
    best_x, best_val = center, np.inf
    w = float(half_width)
    axis = np.linspace(-1.0, 1.0, points)
    for _ in range(levels):
        grids = np.meshgrid(*([axis] * k), indexing="ij")
        cand = best_x + w * np.stack([g.ravel() for g in grids], axis=1)
        vals = obj(cand)
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_x = float(vals[i]), cand[i]
        w *= shrink
    return best_x, best_val


def symmetrization_value(f, gauge, x, half_width=1.0, points=11, levels=34):
    """Brute-force f0(x) = min{f(u) + f(v): x = u - v, u in aQ, v in (1-a)Q}.

    ``gauge`` is the gauge (Minkowski functional) of Q, so the feasible u are
    those with gauge(u) + gauge(u - x) <= 1.  Both ``f`` and ``gauge`` must be
    vectorized over the last axis.
    """
    x = np.asarray(x, dtype=float)

    def obj(u):
        v = u - x
        feas = gauge(u) + gauge(v) <= 1.0 + 1e-12
        out = np.full(u.shape[0], np.inf)
        if feas.any():
            out[feas] = f(u[feas]) + f(v[feas])
        return out

    start = np.maximum(x, 0.0) if np.all(np.isfinite(gauge(np.maximum(x, 0.0)[None]))) else 0.5 * x
    _, val = _zoom_minimize(obj, start, half_width, points=points, levels=levels)
    return val


def symmetrization_modulus_check(f, gauge, mu, n, samples, rng=None, norm_fn=None, tol=1e-7):
    """Check the midpoint inequality of f0 with modulus mu/2 on random pairs.

    Points are drawn uniformly from the l1 ball when ``norm_fn`` is None
    (the entropy case) and ``norm_fn`` is used for distances.  Returns True iff
    f0((x+y)/2) <= (f0(x)+f0(y))/2 - (mu/16)||x-y||^2 holds on every pair.
    """
    rng = np.random.default_rng(rng)
    norm_fn = norm_fn or (lambda z: float(np.abs(z).sum()))
    for _ in range(samples):
        x = _sample_unit_ball(rng, n, norm_fn)
        y = _sample_unit_ball(rng, n, norm_fn)
        mid = 0.5 * (x + y)
        lhs = symmetrization_value(f, gauge, mid)
        rhs = 0.5 * (symmetrization_value(f, gauge, x) + symmetrization_value(f, gauge, y)) \
            - mu / 16.0 * norm_fn(x - y) ** 2
        if lhs > rhs + tol:
            return False
    return True


def _sample_unit_ball(rng, n, norm_fn):
    g = rng.standard_normal(n)
    nrm = norm_fn(g)
    return g / nrm * rng.uniform() ** (1.0 / n) if nrm > 0 else g
