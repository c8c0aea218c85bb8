"""Single-stage dual averaging on a local problem Q ∩ B_R(x_bar).

The method starts at the prox-center, accumulates weighted subgradients in a
dual vector s and maps -s back through the prox-mapping.  The output is the
weighted average of the visited points; the gap value certifies it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .geometry import ProxFunction
from .problems import ConvexityParams, FirstOrderOracle
from .proxmap import LocalProblem, prox_map, support


class Compensated:
    """Kahan running sum for scalars or arrays."""

    __slots__ = ("total", "_comp")

    def __init__(self, zero):
        self.total = zero
        self._comp = zero * 0.0

    def add(self, value):
        y = value - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t


@dataclass
class DAConfig:
    """Iteration budget N and the weight / gain schedules.

    Give either ``gamma`` (constant gain beta_i = gamma sqrt(N+1)) or an
    explicit nondecreasing ``betas`` (beta_0, beta_1, ...; padded with its
    last entry).  ``lambdas`` defaults to all ones.  ``record_every`` > 0
    adds a trace row every that many iterations; the last one is always kept.
    """

    N: int
    gamma: float | None = None
    betas: np.ndarray | None = None
    lambdas: np.ndarray | None = None
    record_every: int = 0

    def __post_init__(self):
        if self.N < 0:
            raise ValueError("N must be nonnegative")
        if (self.gamma is None) == (self.betas is None):
            raise ValueError("give exactly one of gamma and betas")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.betas is not None:
            b = np.asarray(self.betas, dtype=float)
            if b.size == 0 or np.any(b <= 0) or np.any(np.diff(b) < 0):
                raise ValueError("betas must be positive and nondecreasing")
        if self.lambdas is not None:
            lam = np.asarray(self.lambdas, dtype=float)
            if lam.size < self.N + 1 or np.any(lam <= 0):
                raise ValueError("need N+1 positive weights")

    def beta_schedule(self):
        """beta_0 ... beta_{N+1}."""
        if self.gamma is not None:
            return np.full(self.N + 2, self.gamma * math.sqrt(self.N + 1))
        b = np.asarray(self.betas, dtype=float)
        if b.size >= self.N + 2:
            return b[: self.N + 2].copy()
        return np.concatenate([b, np.full(self.N + 2 - b.size, b[-1])])

    def lambda_schedule(self):
        if self.lambdas is None:
            return np.ones(self.N + 1)
        return np.asarray(self.lambdas, dtype=float)[: self.N + 1].copy()


@dataclass
class DAState:
    """Running sums of one dual averaging run.

    ``s`` / ``sum_inner`` use the observed subgradients, the ``*_exact``
    twins use the exact ones (they coincide for deterministic oracles).
    ``sq_term`` accumulates lambda_i^2 ||g_i||_*^2 / beta_i.
    """

    center: np.ndarray
    x: np.ndarray
    s: Compensated
    s_exact: Compensated
    weighted_sum: Compensated
    weight_total: float = 0.0
    sum_inner: Compensated = field(default_factory=lambda: Compensated(0.0))
    sum_inner_exact: Compensated = field(default_factory=lambda: Compensated(0.0))
    sq_term: Compensated = field(default_factory=lambda: Compensated(0.0))
    sq_term_exact: Compensated = field(default_factory=lambda: Compensated(0.0))
    beta_next: float = 0.0
    k: int = 0
    points: list | None = None

    @classmethod
    def start(cls, center, keep_points=False):
        z = np.asarray(center, dtype=float)
        zero = np.zeros_like(z)
        return cls(z, z.copy(), Compensated(zero.copy()), Compensated(zero.copy()),
                   Compensated(zero.copy()), points=[] if keep_points else None)

    @property
    def average(self):
        return self.weighted_sum.total / self.weight_total


@dataclass
class IterRecord:
    stage: int
    iter: int
    oracle_calls: int
    f_gap: float
    dist_to_opt: float
    delta_observed: float
    delta_exact: float
    beta: float
    radius: float


@dataclass
class StageRecord:
    stage: int
    N: int
    center: np.ndarray
    radius: float
    beta: float
    x_out: np.ndarray
    delta_observed: float
    delta_exact: float
    oracle_calls: int
    f_out: float = math.nan
    best_f: float = math.nan
    witness_mean: np.ndarray | None = None
    witness_count: int = 0


@dataclass
class Trace:
    iterations: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    schedule: object = None
    notes: list = field(default_factory=list)

    @property
    def oracle_calls(self):
        return sum(st.N + 1 for st in self.stages)

    def extend(self, other: "Trace"):
        self.iterations.extend(other.iterations)
        self.stages.extend(other.stages)


def gap_value(state: DAState, lp: LocalProblem, exact=False):
    """delta = (sum lambda)^{-1} [sum lambda <g_i, x_i - x_bar> + max_{Q_R(x_bar)} <-s, x - x_bar>]."""
    if state.weight_total <= 0:
        raise ValueError("gap value needs at least one step")
    s = state.s_exact.total if exact else state.s.total
    inner = state.sum_inner_exact.total if exact else state.sum_inner.total
    sup, _ = support(lp.setup, lp.z, lp.R, -s)
    return (inner + sup) / state.weight_total


def certificate_sides(state: DAState, lp: LocalProblem, x, exact=True):
    """Both sides of the dual averaging regret inequality at a point x of Q_R(x_bar).

    lhs = sum lambda_i <g_i, x_i - x>,
    rhs = d_{x_bar,R}(x) beta_{k+1} + R^2/(2 mu(d)) sum lambda_i^2 ||g_i||_*^2 / beta_i.
    """
    s = state.s_exact.total if exact else state.s.total
    inner = state.sum_inner_exact.total if exact else state.sum_inner.total
    sq = state.sq_term_exact.total if exact else state.sq_term.total
    x = np.asarray(x, dtype=float)
    lhs = inner - float(s @ (x - lp.z))
    rhs = lp.d_local(x) * state.beta_next + lp.R ** 2 / (2.0 * lp.setup.prox.mu_d) * sq
    return lhs, rhs


def _record(trace, state, lp, oracle, stage, beta, stochastic):
    x_avg = state.average
    f_gap = dist = math.nan
    if oracle.f_star is not None:
        f_gap = oracle.value(x_avg) - oracle.f_star
    if oracle.x_star is not None:
        dist = lp.setup.local_norm(x_avg - oracle.x_star)
    d_obs = gap_value(state, lp)
    d_ex = gap_value(state, lp, exact=True) if stochastic else d_obs
    trace.iterations.append(IterRecord(stage, state.k, oracle.calls, f_gap, dist, d_obs, d_ex, beta, lp.R))


def _fast_dual_norm(setup):
    q = setup.norm.dual_exponent
    if q == 2:
        return lambda g: math.sqrt(float(g @ g))
    if math.isinf(q):
        return lambda g: float(np.abs(g).max(initial=0.0))
    return setup.dual_norm


def da_run(oracle: FirstOrderOracle, lp: LocalProblem, cfg: DAConfig, *, trace=None, stage=0,
           keep_points=False, collect_witnesses=False):
    """Run N+1 oracle calls of dual averaging from the prox-center of ``lp``.

    Returns ``(x_out, trace, state)`` where x_out is the weighted average of
    x_0 ... x_N.  ``lp.beta`` is ignored; the gains come from ``cfg``.  With
    ``collect_witnesses`` the plain mean of the oracle's dual witnesses is
    stored on the stage record.
    """
    trace = Trace() if trace is None else trace
    betas = cfg.beta_schedule()
    lams = cfg.lambda_schedule()
    stochastic = oracle.stochastic
    dual_norm = _fast_dual_norm(lp.setup)
    state = DAState.start(lp.z, keep_points)
    constant = cfg.gamma is not None
    local = lp.with_beta(betas[1])
    track_values = oracle.f_star is not None
    best_f = math.inf
    wsum = None
    for k in range(cfg.N + 1):
        x = state.x
        ans = oracle.query(x)
        lam = lams[k]
        g = ans.g
        state.s.add(lam * g)
        state.weighted_sum.add(lam * x)
        state.weight_total += lam
        offset = x - lp.z
        state.sum_inner.add(lam * float(g @ offset))
        state.sq_term.add(lam * lam * dual_norm(g) ** 2 / betas[k])
        if stochastic:
            ge = ans.exact_g
            state.s_exact.add(lam * ge)
            state.sum_inner_exact.add(lam * float(ge @ offset))
            state.sq_term_exact.add(lam * lam * dual_norm(ge) ** 2 / betas[k])
        else:
            state.s_exact = state.s
            state.sum_inner_exact = state.sum_inner
            state.sq_term_exact = state.sq_term
        if keep_points:
            state.points.append(x.copy())
        if collect_witnesses:
            if ans.witness is None:
                raise ValueError("the oracle supplies no dual witness")
            if wsum is None:
                wsum = Compensated(np.zeros_like(ans.witness))
            wsum.add(ans.witness)
        if track_values and ans.value is not None and not stochastic:
            best_f = min(best_f, ans.value)
        state.k = k
        state.beta_next = betas[k + 1]
        if cfg.record_every and k < cfg.N and (k + 1) % cfg.record_every == 0:
            _record(trace, state, lp, oracle, stage, betas[k + 1], stochastic)
        if k < cfg.N:
            if not constant:
                local = lp.with_beta(betas[k + 1])
            state.x = prox_map(local, -state.s.total)
    _record(trace, state, lp, oracle, stage, betas[cfg.N + 1], stochastic)
    last = trace.iterations[-1]
    x_out = state.average
    f_out = oracle.value(x_out) if track_values else math.nan
    trace.stages.append(StageRecord(stage, cfg.N, lp.z.copy(), lp.R, float(betas[cfg.N + 1]), x_out.copy(),
                                    last.delta_observed, last.delta_exact, cfg.N + 1, f_out, best_f,
                                    None if wsum is None else wsum.total / (cfg.N + 1),
                                    cfg.N + 1 if wsum is not None else 0))
    return x_out, trace, state


def theoretical_bounds(params: ConvexityParams, prox: ProxFunction, R, N, *, r=None, alpha=None):
    """Recommended gain and closed-form guarantees for one stage of N+1 calls.

    With ``r`` the quadratic-growth variant is used: gamma = R^2 L / (r sqrt(2 C mu)),
    bound r L sqrt(2 C / (mu (N+1))); otherwise gamma = L R / sqrt(2 mu A),
    bound L R sqrt(2 A / (mu (N+1))).  L^2 is replaced by L^2 + sigma^2 so the
    stochastic (expectation) bounds reduce to the deterministic ones at
    sigma = 0.  ``dist_bound`` bounds ||x_out - x*|| through
    mu_f ||x_out - x*||^rho <= gap.  With ``alpha`` the high-probability gap
    adds 2 R sigma sqrt(3 ln(1/alpha) / (N+1)).
    """
    mu_d = prox.mu_d
    Leff = math.sqrt(params.L ** 2 + params.sigma ** 2)
    if r is None:
        gamma = Leff * R / math.sqrt(2.0 * mu_d * prox.A_d)
        gap = Leff * R * math.sqrt(2.0 * prox.A_d / (mu_d * (N + 1)))
    else:
        if prox.C_d is None:
            raise ValueError(f"{prox.kind} has no quadratic-growth constant")
        gamma = R * R * Leff / (r * math.sqrt(2.0 * prox.C_d * mu_d))
        gap = r * Leff * math.sqrt(2.0 * prox.C_d / (mu_d * (N + 1)))
    out = {"gamma_star": gamma, "f_gap_bound": gap,
           "dist_bound": (gap / params.mu_f) ** (1.0 / params.rho) if params.mu_f > 0 else math.inf}
    if alpha is not None:
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        out["confidence_bound"] = gap + 2.0 * R * params.sigma * math.sqrt(3.0 * math.log(1.0 / alpha) / (N + 1))
    return out
