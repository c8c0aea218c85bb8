"""Test objectives with certified convexity parameters and first-order oracles.

Every oracle exposes ``query(x)`` (counted) returning an :class:`OracleAnswer`
and ``value(x)`` (not counted) for post-hoc evaluation.  Stochastic oracles
add zero-mean noise to the exact subgradient; the exact one is kept in the
answer for diagnostics.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .geometry import conjugate_exponent, lp_norm
from .proxmap import FeasibleSet

NOISE_KINDS = ("none", "bounded", "subgaussian")


@dataclass(frozen=True)
class ConvexityParams:
    """(rho, mu_f, L, sigma) of a problem, measured in one fixed norm.

    mu_f is the coefficient of the three-point inequality
    f(y) >= f(x) + <f'(x), y - x> + mu_f/2 ||y - x||^rho.
    """

    rho: float
    mu_f: float
    L: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.rho < 2:
            raise ValueError("rho must be >= 2")
        if self.mu_f < 0 or self.L <= 0 or self.sigma < 0:
            raise ValueError("need mu_f >= 0, L > 0, sigma >= 0")

    def with_sigma(self, sigma):
        return ConvexityParams(self.rho, self.mu_f, self.L, sigma)

    @property
    def tau(self):
        return 2.0 * (self.rho - 1.0) / self.rho


@dataclass
class OracleAnswer:
    g: np.ndarray
    value: float | None = None
    witness: np.ndarray | None = None
    exact_g: np.ndarray | None = None


class FirstOrderOracle:
    """Base class: subclasses implement ``_evaluate(x) -> (value, g, witness)``."""

    norm_kind = "l2"

    def __init__(self, params: ConvexityParams, n: int, x_star=None, f_star=None):
        self.params = params
        self.n = n
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.f_star = f_star
        self.calls = 0

    def _evaluate(self, x):
        raise NotImplementedError

    def query(self, x) -> OracleAnswer:
        x = np.asarray(x, dtype=float)
        self.calls += 1
        val, g, w = self._evaluate(x)
        return OracleAnswer(g, val, w, g)

    def value(self, x) -> float:
        return float(self._evaluate(np.asarray(x, dtype=float))[0])

    def subgradient(self, x):
        return self._evaluate(np.asarray(x, dtype=float))[1]

    @property
    def stochastic(self):
        return False


class LinearObjective(FirstOrderOracle):
    """f(x) = <c, x>; convex with mu_f = 0."""

    def __init__(self, c, L=None, x_star=None, f_star=None):
        c = np.asarray(c, dtype=float)
        L = float(np.linalg.norm(c)) if L is None else L
        super().__init__(ConvexityParams(2.0, 0.0, L), c.size, x_star, f_star)
        self.c = c

    def _evaluate(self, x):
        return float(self.c @ x), self.c.copy(), None


class PowerObjective(FirstOrderOracle):
    """f(x) = 2^{rho-3} ||x - x*||_2^rho."""

    def __init__(self, rho, x_star, params):
        x_star = np.asarray(x_star, dtype=float)
        super().__init__(params, x_star.size, x_star, 0.0)
        self.rho = float(rho)
        self.scale = 2.0 ** (self.rho - 3.0)

    def _evaluate(self, x):
        h = x - self.x_star
        r = math.sqrt(float(h @ h))
        val = self.scale * r ** self.rho
        if r == 0.0:
            return val, np.zeros_like(h), None
        return val, self.scale * self.rho * r ** (self.rho - 2.0) * h, None


def farthest_distance(Q: FeasibleSet, point):
    """max_{x in Q} ||x - point||_2 (attained at a vertex or on the sphere)."""
    p = np.asarray(point, dtype=float)
    k = Q.kind
    if k == "full":
        return math.inf
    if k == "euclidean_ball":
        return Q.radius + float(np.linalg.norm(p))
    if k == "box":
        lo, hi = np.asarray(Q.lo), np.asarray(Q.hi)
        return float(np.sqrt(np.sum(np.maximum((p - lo) ** 2, (hi - p) ** 2))))
    base = float(p @ p)
    if k == "simplex":
        return math.sqrt(base + 1.0 - 2.0 * float(p.min()))
    return math.sqrt(base + Q.radius ** 2 + 2.0 * Q.radius * float(np.abs(p).max()))


def make_power_objective(rho, x_star, Q: FeasibleSet, *, norm="l2", radius=None):
    """Power objective with parameters certified on Q.

    ``radius`` bounds ||x - x*||_2 over the region of interest: by default the
    l2 diameter of Q, ``"reach"`` for the exact farthest distance from x*, or
    a number (required for the full space).  In the l1 norm the modulus
    becomes n^{-rho/2} and the l-infinity subgradient bound is inherited
    from l2.
    """
    if rho < 2:
        raise ValueError("rho must be >= 2")
    x_star = np.asarray(x_star, dtype=float)
    if not Q.contains(x_star):
        raise ValueError("x_star must lie in Q")
    if radius is None:
        D = Q.diameter("l2")
    elif radius == "reach":
        D = farthest_distance(Q, x_star)
    else:
        D = float(radius)
    if not math.isfinite(D):
        raise ValueError("the full space needs an explicit radius")
    L = 2.0 ** (rho - 3.0) * rho * D ** (rho - 1.0)
    mu = 1.0 if norm == "l2" else Q.n ** (-rho / 2.0)
    return PowerObjective(rho, x_star, ConvexityParams(float(rho), mu, L))


class SaddlePNorm(FirstOrderOracle):
    """f(x) = max_w <w, x> - ||w||_q^2 / 2 = ||x||_p^2 / 2 with p = q/(q-1).

    The maximizing w(x) is both the subgradient and the dual witness.
    """

    def __init__(self, q, Q: FeasibleSet, params):
        super().__init__(params, Q.n)
        if not 2 <= q < math.inf:
            raise ValueError("need 2 <= q < inf")
        self.q = float(q)
        self.p = conjugate_exponent(self.q)
        self.Q = Q
        self.x_star, self.f_star = self._minimizer()

    def _minimizer(self):
        if self.Q.kind in ("full", "euclidean_ball", "l1_ball", "box") and self.Q.contains(np.zeros(self.n)):
            return np.zeros(self.n), 0.0
        if self.Q.kind == "simplex":
            x = np.full(self.n, 1.0 / self.n)
            return x, self.value(x)
        return None, None

    def witness(self, x):
        nrm = lp_norm(x, self.p)
        if nrm == 0.0:
            return np.zeros_like(x)
        q = self.q
        return nrm ** ((q - 2.0) / (q - 1.0)) * np.abs(x) ** (1.0 / (q - 1.0)) * np.sign(x)

    def psi(self, x, w):
        return float(np.asarray(w) @ np.asarray(x)) - 0.5 * lp_norm(w, self.q) ** 2

    def _evaluate(self, x):
        w = self.witness(x)
        return 0.5 * lp_norm(x, self.p) ** 2, w, w

    def dual_value(self, w):
        """eta(w) = min_{x in Q} Psi(x, w) in closed form."""
        w = np.asarray(w, dtype=float)
        half = 0.5 * lp_norm(w, self.q) ** 2
        k = self.Q.kind
        if k == "l1_ball":
            return -self.Q.radius * float(np.abs(w).max(initial=0.0)) - half
        if k == "simplex":
            return float(w.min()) - half
        if k == "euclidean_ball":
            return -self.Q.radius * float(np.linalg.norm(w)) - half
        raise ValueError(f"no closed-form dual function on {k!r}")


def make_saddle_pnorm(q, Q: FeasibleSet, *, norm="l2"):
    """Saddle objective with its certified parameters.

    ||x||_p^2/2 is (p - 1)-strongly convex in ||.||_p, hence in l2 (p <= 2);
    in l1 the modulus shrinks to (p - 1) n^{2(1-p)/p}.  L bounds the dual norm
    of w(x), using ||w(x)||_q = ||x||_p.
    """
    p = conjugate_exponent(float(q))
    n = Q.n
    if Q.kind == "l1_ball":
        reach = Q.radius
    elif Q.kind == "simplex":
        reach = 1.0
    elif Q.kind == "euclidean_ball":
        reach = n ** (1.0 / p - 0.5) * Q.radius
    elif Q.kind == "box":
        reach = lp_norm(np.maximum(np.abs(Q.lo), np.abs(Q.hi)), p)
    else:
        raise ValueError("the saddle objective needs a bounded feasible set")
    if norm == "l2":
        mu = p - 1.0
        L = n ** (0.5 - 1.0 / float(q)) * reach
    else:
        mu = (p - 1.0) * n ** (2.0 * (1.0 - p) / p)
        L = reach
    return SaddlePNorm(q, Q, ConvexityParams(2.0, mu, L))


class PiecewisePlusPower(FirstOrderOracle):
    """f(x) = L/2 max_{i<M}(xi_i x_{idx_i} + d_i) + 2^{rho-3} ||x||_2^rho.

    Ties in the max go to the lowest piece index.
    """

    def __init__(self, L, rho, n, indices, signs, offsets, R=1.0):
        if L < 2.0 ** (rho - 2.0) * rho * R ** (rho - 1.0):
            raise ValueError("need L >= 2^{rho-2} rho R^{rho-1}")
        if len(indices) > n:
            raise ValueError("more pieces than coordinates")
        params = ConvexityParams(float(rho), 1.0, float(L))
        super().__init__(params, n)
        self.L = float(L)
        self.rho = float(rho)
        self.R = float(R)
        self.indices = np.asarray(indices, dtype=int)
        self.signs = np.asarray(signs, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)

    def _pieces(self, x):
        return self.signs * x[self.indices] + self.offsets

    def _evaluate(self, x):
        g = np.zeros(self.n)
        val = 0.0
        if self.indices.size:
            pieces = self._pieces(x)
            j = int(np.argmax(pieces))
            val = 0.5 * self.L * float(pieces[j])
            g[self.indices[j]] = 0.5 * self.L * self.signs[j]
        r = float(np.linalg.norm(x))
        val += 2.0 ** (self.rho - 3.0) * r ** self.rho
        if r > 0:
            g += 2.0 ** (self.rho - 3.0) * self.rho * r ** (self.rho - 2.0) * x
        return val, g, None


def make_piecewise_plus_power(L, rho, M, signs, offsets, *, n=None, R=1.0, delta=None):
    """Static hard instance on the first M coordinates."""
    n = M if n is None else n
    if M > n:
        raise ValueError("need M <= n")
    offsets = np.asarray(offsets, dtype=float)
    if delta is not None and np.any(np.abs(offsets) >= delta):
        raise ValueError("offsets must be smaller than delta")
    return PiecewisePlusPower(L, rho, n, np.arange(M), signs, offsets, R)


def strict_floor(a):
    """Largest integer strictly smaller than a."""
    return int(math.ceil(a)) - 1


@dataclass(frozen=True)
class HardInstanceParams:
    L: float
    rho: float
    R: float
    eps: float
    M: int
    delta: float
    lam: float


def hard_instance_params(L, rho, R, eps, n):
    """Number of pieces M, offset scale delta and the comparison point scale.

    M is the largest integer strictly below L^2 R^2 / (16 eps^2) and
    L^2 / (8 eps)^tau, capped at n; this is exactly the range where delta > 0.
    For rho = 2 the second term is L^2 / (8 eps).
    """
    if L < 2.0 ** (rho - 2.0) * rho * R ** (rho - 1.0):
        raise ValueError("need L >= 2^{rho-2} rho R^{rho-1}")
    tau = 2.0 * (rho - 1.0) / rho
    M = strict_floor(min(L * L * R * R / (16.0 * eps * eps), L * L / (8.0 * eps) ** tau))
    M = min(M, n)
    if M < 1:
        raise ValueError("accuracy too coarse for a nontrivial instance")
    delta = min(L * R / (4.0 * math.sqrt(M)), L ** (rho / (rho - 1.0)) / (8.0 * M ** (rho / (2.0 * (rho - 1.0))))) - eps
    if delta <= 0:
        raise ValueError("delta must be positive; increase n or decrease eps")
    lam = min(R / math.sqrt(M), (2.0 ** (2.0 - rho) * L / (rho * M ** (rho / 2.0))) ** (1.0 / (rho - 1.0)))
    return HardInstanceParams(float(L), float(rho), float(R), float(eps), M, delta, lam)


class ResistingOracle(FirstOrderOracle):
    """Adversarial oracle that fixes one piece of the hard instance per query.

    On the k-th query the largest-magnitude coordinate not yet used (lowest
    index on ties, sign(0) = +1) becomes piece k with offset 2^{-k} delta.
    Answers use only the pieces fixed so far; later pieces are dominated
    there, so the answers agree with the final instance.  After M queries the
    instance is frozen.
    """

    def __init__(self, L, rho, M, delta, n, R=1.0):
        super().__init__(ConvexityParams(float(rho), 1.0, float(L)), n)
        if M > n:
            raise ValueError("need M <= n")
        if delta <= 0:
            raise ValueError("need delta > 0")
        self.L, self.rho, self.M, self.delta, self.R = float(L), float(rho), int(M), float(delta), float(R)
        self.indices: list[int] = []
        self.signs: list[float] = []
        self.offsets: list[float] = []
        self._used = np.zeros(n, dtype=bool)
        self.queried: list[np.ndarray] = []

    @property
    def frozen(self):
        return len(self.indices) >= self.M

    def _fix_piece(self, x):
        k = len(self.indices) + 1
        mag = np.where(self._used, -1.0, np.abs(x))
        i = int(np.argmax(mag))
        self._used[i] = True
        self.indices.append(i)
        self.signs.append(1.0 if x[i] >= 0 else -1.0)
        self.offsets.append(2.0 ** (-k) * self.delta)

    def _current(self):
        return PiecewisePlusPower(self.L, self.rho, self.n, self.indices, self.signs, self.offsets, self.R)

    def query(self, x) -> OracleAnswer:
        x = np.asarray(x, dtype=float)
        if not self.frozen:
            self._fix_piece(x)
        self.queried.append(x.copy())
        self.calls += 1
        val, g, _ = self._current()._evaluate(x)
        return OracleAnswer(g, val, None, g)

    def _evaluate(self, x):
        return self._current()._evaluate(x)

    def frozen_instance(self):
        """The final instance; unfixed pieces are completed as if queried at 0."""
        idx, sg, off = list(self.indices), list(self.signs), list(self.offsets)
        used = self._used.copy()
        while len(idx) < self.M:
            i = int(np.argmax(~used))
            used[i] = True
            idx.append(i)
            sg.append(1.0)
            off.append(2.0 ** (-len(idx)) * self.delta)
        return PiecewisePlusPower(self.L, self.rho, self.n, idx, sg, off, self.R)

    def comparison_point(self, lam):
        """x_bar = -lam sum_i xi_i e_i over the frozen pieces (f(x_bar) <= -eps)."""
        inst = self.frozen_instance()
        x = np.zeros(self.n)
        x[inst.indices] = -lam * inst.signs
        return x


def make_resisting_oracle(hp: HardInstanceParams, n):
    return ResistingOracle(hp.L, hp.rho, hp.M, hp.delta, n, hp.R)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean gradient noise of intensity sigma measured in a dual norm.

    ``bounded``: uniform on the dual ball of radius sigma (l2 ball, l-infinity
    cube, or radial law for other exponents), so ||xi||_* <= sigma.
    ``subgaussian``: Gaussian coordinates with a per-norm scale chosen so that
    E exp(||xi||_*^2 / sigma^2) <= e; for the l2 dual norm the scale is exact,
    for l-infinity it is sigma / sqrt(2 ln(2n)) (n >= 2), whose moment is
    about 2.62 at n = 2 and near 2.1 for larger n.
    """

    kind: str = "none"
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def scale(self, n, dual_exponent):
        if self.kind != "subgaussian":
            return self.sigma
        # in one dimension every dual norm is |.|, and the l-inf rule diverges
        if dual_exponent == 2 or n == 1:
            return self.sigma * math.sqrt(-math.expm1(-2.0 / n) / 2.0)
        if math.isinf(dual_exponent):
            return self.sigma / math.sqrt(2.0 * math.log(2 * n))
        raise ValueError("subgaussian noise is defined for l2 and l-infinity dual norms")

    def draw(self, rng: np.random.Generator, n, dual_exponent=2.0):
        if self.kind == "none" or self.sigma == 0:
            return np.zeros(n)
        if self.kind == "subgaussian":
            return self.scale(n, dual_exponent) * rng.standard_normal(n)
        if dual_exponent == 2:
            g = rng.standard_normal(n)
            return self.sigma * rng.uniform() ** (1.0 / n) * g / np.linalg.norm(g)
        if math.isinf(dual_exponent):
            return rng.uniform(-self.sigma, self.sigma, size=n)
        g = rng.standard_normal(n)
        return self.sigma * rng.uniform() ** (1.0 / n) * g / lp_norm(g, dual_exponent)


class StochasticOracle(FirstOrderOracle):
    """g = f'(x) + xi with xi drawn from ``noise`` on a private generator."""

    def __init__(self, base: FirstOrderOracle, noise: NoiseModel, rng, dual_exponent=2.0):
        super().__init__(base.params.with_sigma(noise.sigma if noise.kind != "none" else 0.0),
                         base.n, base.x_star, base.f_star)
        self.base = base
        self.noise = noise
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.dual_exponent = dual_exponent

    def _evaluate(self, x):
        return self.base._evaluate(x)

    def query(self, x) -> OracleAnswer:
        x = np.asarray(x, dtype=float)
        self.calls += 1
        val, g, w = self.base._evaluate(x)
        if self.noise.kind == "none" or self.noise.sigma == 0:
            return OracleAnswer(g, val, w, g)
        xi = self.noise.draw(self.rng, self.n, self.dual_exponent)
        return OracleAnswer(g + xi, val, w, g)

    def dual_value(self, w):
        return self.base.dual_value(w)

    @property
    def stochastic(self):
        return self.noise.kind != "none" and self.noise.sigma > 0


def stochastic_wrap(oracle: FirstOrderOracle, noise: NoiseModel, rng=None, dual_exponent=2.0):
    return StochasticOracle(oracle, noise, rng, dual_exponent)


def three_point_holds(oracle: FirstOrderOracle, x, y, mu, rho, norm_fn, tol=1e-9):
    """f(y) >= f(x) + <f'(x), y - x> + mu/2 ||y - x||^rho (up to tol)."""
    fx = oracle.value(x)
    gx = oracle.subgradient(x)
    rhs = fx + float(gx @ (y - x)) + 0.5 * mu * norm_fn(y - x) ** rho
    return oracle.value(y) >= rhs - tol * (1.0 + abs(rhs))


def lipschitz_holds(oracle: FirstOrderOracle, x, L, dual_norm_fn, tol=1e-12):
    return dual_norm_fn(oracle.subgradient(x)) <= L * (1 + tol) + tol
