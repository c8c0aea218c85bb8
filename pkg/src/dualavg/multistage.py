"""Restart schemes built on single-stage dual averaging.

Two families are provided.  Shrinking-ball schemes rerun DA on a ball around
the last output whose radius satisfies R_k^rho = 2^{-k} R_0^rho.  Fixed
dilation schemes keep the ball radius R_0 and only raise the gain, which
needs a prox-function with quadratic growth (constant C(d)).  Both come in an
accuracy-target form and a fixed-budget form, and the adaptive variants need
only L and R_0.

Budgets are counted in oracle calls: a stage of N_k iterations uses N_k + 1.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .da_core import DAConfig, Trace, da_run
from .problems import ConvexityParams, FirstOrderOracle, strict_floor
from .proxmap import LocalProblem, ProxSetup

SCHEMES = ("ball", "fixed_dilation")
MODES = ("eps", "budget")
ADAPTIVE_VARIANTS = ("adaptive", "stoca", "adaptive-s")
SNAP = 1e-9


def _snap(a):
    r = round(a)
    return float(r) if abs(a - r) <= SNAP * max(1.0, abs(a)) else a


def floor_strict(a):
    """Largest integer strictly smaller than a (values within 1e-9 of an integer count as it)."""
    return strict_floor(_snap(a))


def floor_down(a):
    """Largest integer less than or equal to a (with the same snapping)."""
    return int(math.floor(_snap(a)))


@dataclass(frozen=True)
class StageSpec:
    k: int
    N: int
    radius: float   # ball radius used by the stage's DA run
    target: float   # R_k (ball schemes) or r_k (fixed dilation)
    gamma: float


@dataclass
class StageSchedule:
    tau: float
    stages: list
    kind: str

    @property
    def m(self):
        return len(self.stages)

    @property
    def calls(self):
        return sum(s.N + 1 for s in self.stages)


@dataclass
class RunParams:
    """Inputs of a restart scheme.

    ``mode`` is "eps" (target accuracy ``eps``) or "budget" (at most ``N``
    oracle calls).  ``scheme`` is "ball" or "fixed_dilation".  ``R0`` bounds
    the distance from x0 to the minimizer in the prox norm (fixed dilation:
    the diameter of Q).  With ``stochastic`` the schedules use L^2 + sigma^2.
    """

    params: ConvexityParams
    setup: ProxSetup
    x0: np.ndarray
    R0: float
    mode: str = "eps"
    eps: float | None = None
    N: int | None = None
    scheme: str = "ball"
    stochastic: bool = False
    record_every: int = 0
    collect_witnesses: bool = False

    def __post_init__(self):
        if self.mode not in MODES or self.scheme not in SCHEMES:
            raise ValueError("unknown mode or scheme")
        if self.mode == "eps" and not (self.eps and self.eps > 0):
            raise ValueError("eps mode needs eps > 0")
        if self.mode == "budget" and not (self.N and self.N >= 1):
            raise ValueError("budget mode needs N >= 1")
        if self.scheme == "fixed_dilation" and self.setup.prox.C_d is None:
            raise ValueError("fixed dilation needs a prox-function with quadratic growth")
        self.x0 = np.asarray(self.x0, dtype=float)
        if not self.setup.Q.contains(self.x0):
            raise ValueError("x0 must lie in Q")
        if self.R0 <= 0:
            raise ValueError("R0 must be positive")

    @property
    def growth_const(self):
        return self.setup.prox.C_d if self.scheme == "fixed_dilation" else self.setup.prox.A_d

    @property
    def L2(self):
        p = self.params
        return p.L ** 2 + (p.sigma ** 2 if self.stochastic else 0.0)


# ---------------------------------------------------------------------------
# schedules


def stage_base(L2, const, params: ConvexityParams, mu_d, R0):
    """4 L^2 K / (mu_f^2 mu(d) R0^{2(rho-1)}) with K = A(d) or C(d)."""
    if params.mu_f <= 0:
        raise ValueError("restarts need mu_f > 0")
    return 4.0 * L2 * const / (params.mu_f ** 2 * mu_d * R0 ** (2.0 * (params.rho - 1.0)))


def _stage_lengths(base, tau, count):
    return [floor_down(2.0 ** (tau * k) * base) for k in range(1, count + 1)]


def _make_stages(lengths, rp_like, tau):
    """Attach radii and gains to stage lengths."""
    params, setup, R0, scheme, L2 = rp_like
    rho = params.rho
    mu_d = setup.prox.mu_d
    out = []
    for k, Nk in enumerate(lengths, start=1):
        prev = R0 * 2.0 ** (-(k - 1) / rho)
        target = R0 * 2.0 ** (-k / rho)
        if scheme == "ball":
            gamma = math.sqrt(L2) * prev / math.sqrt(2.0 * mu_d * setup.prox.A_d)
            out.append(StageSpec(k, Nk, prev, target, gamma))
        else:
            gamma = R0 * R0 * math.sqrt(L2) / (prev * math.sqrt(2.0 * setup.prox.C_d * mu_d))
            out.append(StageSpec(k, Nk, R0, target, gamma))
    return out


def stage_count_eps(params: ConvexityParams, R0, eps):
    """m = floor_strict(log2(mu_f R0^rho / eps)) + 1, at least one stage."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if params.mu_f <= 0:
        raise ValueError("restarts need mu_f > 0")
    return max(1, floor_strict(math.log2(params.mu_f * R0 ** params.rho / eps)) + 1)


def schedule_eps(params: ConvexityParams, setup: ProxSetup, R0, eps, *, scheme="ball", L2=None):
    """Target-accuracy schedule (shrinking balls or fixed dilation)."""
    tau = params.tau
    L2 = params.L ** 2 if L2 is None else L2
    const = setup.prox.A_d if scheme == "ball" else setup.prox.C_d
    if const is None:
        raise ValueError("fixed dilation needs C(d)")
    base = stage_base(L2, const, params, setup.prox.mu_d, R0)
    m = stage_count_eps(params, R0, eps)
    stages = _make_stages(_stage_lengths(base, tau, m), (params, setup, R0, scheme, L2), tau)
    return StageSchedule(tau, stages, scheme)


def schedule_ball_eps(params: ConvexityParams, setup: ProxSetup, R0, eps):
    return schedule_eps(params, setup, R0, eps, scheme="ball")


def budget_threshold(params: ConvexityParams, setup: ProxSetup, R0, *, scheme="ball", L2=None):
    """N_bar = 2^tau (2^tau + 1) * base: below it the restart scheme is not used."""
    L2 = params.L ** 2 if L2 is None else L2
    const = setup.prox.A_d if scheme == "ball" else setup.prox.C_d
    t = 2.0 ** params.tau
    return t * (t + 1.0) * stage_base(L2, const, params, setup.prox.mu_d, R0)


def schedule_budget(params: ConvexityParams, setup: ProxSetup, R0, N, *, scheme="ball", L2=None):
    """Fixed-budget schedule: the longest prefix of stages with sum(N_k + 1) <= N."""
    tau = params.tau
    L2 = params.L ** 2 if L2 is None else L2
    const = setup.prox.A_d if scheme == "ball" else setup.prox.C_d
    base = stage_base(L2, const, params, setup.prox.mu_d, R0)
    lengths, used, k = [], 0, 1
    while True:
        Nk = floor_down(2.0 ** (tau * k) * base)
        if used + Nk + 1 > N:
            break
        lengths.append(Nk)
        used += Nk + 1
        k += 1
    return StageSchedule(tau, _make_stages(lengths, (params, setup, R0, scheme, L2), tau), scheme)


# ---------------------------------------------------------------------------
# closed-form guarantees


def eps_budget_bound(params: ConvexityParams, prox, eps, *, const=None, L2=None):
    """4^{tau+1} L^2 K / (mu_f^{2/rho} mu(d)) eps^{-tau}."""
    tau = params.tau
    K = prox.A_d if const is None else const
    L2 = params.L ** 2 if L2 is None else L2
    return 4.0 ** (tau + 1.0) * L2 * K / (params.mu_f ** (2.0 / params.rho) * prox.mu_d) * eps ** (-tau)


def fixed_budget_bound(params: ConvexityParams, prox, N, *, const=None, L2=None):
    """2 (8 L^2 K / (mu_f^{2/rho} mu(d) N))^{1/tau}."""
    K = prox.A_d if const is None else const
    L2 = params.L ** 2 if L2 is None else L2
    return 2.0 * (8.0 * L2 * K / (params.mu_f ** (2.0 / params.rho) * prox.mu_d * N)) ** (1.0 / params.tau)


def adaptive_bound(params: ConvexityParams, prox, N, *, stochastic=False):
    """Deterministic: 2 (16 L^2 A log2 N / (mu_f^{2/rho} mu(d) N))^{1/tau};
    stoca (in expectation): 4 (16 (L^2+sigma^2) C log2 N / (...))^{1/tau}."""
    if stochastic:
        L2, K, lead = params.L ** 2 + params.sigma ** 2, prox.C_d, 4.0
    else:
        L2, K, lead = params.L ** 2, prox.A_d, 2.0
    inner = 16.0 * L2 * K * math.log2(N) / (params.mu_f ** (2.0 / params.rho) * prox.mu_d * N)
    return lead * inner ** (1.0 / params.tau)


# ---------------------------------------------------------------------------
# runners


def _center(Q, y):
    return y if Q.contains(y) else Q.project(y)


def _run_stages(oracle, setup, x0, schedule: StageSchedule, record_every=0, trace=None, witnesses=False):
    trace = Trace() if trace is None else trace
    y = x0
    outputs = []
    for st in schedule.stages:
        lp = LocalProblem(setup, _center(setup.Q, y), st.radius)
        y, trace, _ = da_run(oracle, lp, DAConfig(st.N, gamma=st.gamma, record_every=record_every),
                             trace=trace, stage=st.k, collect_witnesses=witnesses)
        outputs.append(y)
    return y, trace, outputs


def _single_stage(oracle, setup, x0, R0, calls, gamma, record_every, trace, note, witnesses=False):
    trace.notes.append(note)
    lp = LocalProblem(setup, x0, R0)
    y, trace, _ = da_run(oracle, lp, DAConfig(max(calls - 1, 0), gamma=gamma, record_every=record_every),
                         trace=trace, stage=1, collect_witnesses=witnesses)
    return y, trace


def _run_scheme(oracle: FirstOrderOracle, rp: RunParams, scheme):
    trace = Trace()
    if rp.mode == "eps":
        sched = schedule_eps(rp.params, rp.setup, rp.R0, rp.eps, scheme=scheme, L2=rp.L2)
    else:
        if rp.N < budget_threshold(rp.params, rp.setup, rp.R0, scheme=scheme, L2=rp.L2):
            K = rp.growth_const
            gamma = math.sqrt(rp.L2) * rp.R0 / math.sqrt(2.0 * rp.setup.prox.mu_d * K)
            trace.schedule = StageSchedule(rp.params.tau, [StageSpec(1, rp.N - 1, rp.R0, rp.R0, gamma)], scheme)
            return _single_stage(oracle, rp.setup, rp.x0, rp.R0, rp.N, gamma, rp.record_every, trace,
                                 "budget below the restart threshold: single stage", rp.collect_witnesses)
        sched = schedule_budget(rp.params, rp.setup, rp.R0, rp.N, scheme=scheme, L2=rp.L2)
    trace.schedule = sched
    y, trace, _ = _run_stages(oracle, rp.setup, rp.x0, sched, rp.record_every, trace, rp.collect_witnesses)
    return y, trace


def run_ball(oracle: FirstOrderOracle, rp: RunParams):
    """Shrinking-ball restarts; returns (x_hat, trace)."""
    if rp.scheme != "ball":
        raise ValueError("run_ball needs scheme='ball'")
    return _run_scheme(oracle, rp, "ball")


def run_fixed_dilation(oracle: FirstOrderOracle, rp: RunParams):
    """Fixed-dilation restarts (all stages on the ball of radius R0); returns (x_hat, trace)."""
    if rp.scheme != "fixed_dilation":
        raise ValueError("run_fixed_dilation needs scheme='fixed_dilation'")
    return _run_scheme(oracle, rp, "fixed_dilation")


@dataclass
class AdaptivePlan:
    m: int
    N0: int          # DA iterations per stage (N0 + 1 calls)
    fallback: bool


def adaptive_plan(N, setup: ProxSetup, *, const=None):
    """m = floor(log2(mu(d) N / (K log2 N)) / 2) - 1 stages of N0 = floor(N/m) - 1 iterations."""
    K = setup.prox.A_d if const is None else const
    if N < 4:
        return AdaptivePlan(0, max(N - 1, 0), True)
    m = floor_down(0.5 * math.log2(setup.prox.mu_d * N / (K * math.log2(N)))) - 1
    if m <= 0:
        return AdaptivePlan(0, N - 1, True)
    return AdaptivePlan(m, N // m - 1, False)


def run_adaptive(oracle: FirstOrderOracle, N, setup: ProxSetup, L, R0, x0, *, variant="adaptive",
                 sigma=0.0, record_every=0):
    """Restarts that need only L and R0.

    ``adaptive``: shrinking balls R_k = 2^{-k} R0, output the stage point with
    the smallest objective value.  ``stoca``: fixed ball R0 with C(d), output
    the last stage point.  ``adaptive-s``: shrinking balls with L^2 + sigma^2,
    output the last stage point.  Returns (x_hat, trace, plan).
    """
    if variant not in ADAPTIVE_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    x0 = np.asarray(x0, dtype=float)
    prox = setup.prox
    L2 = L * L + (sigma * sigma if variant != "adaptive" else 0.0)
    const = prox.C_d if variant == "stoca" else prox.A_d
    if const is None:
        raise ValueError("stoca needs a prox-function with quadratic growth")
    plan = adaptive_plan(N, setup, const=const)
    trace = Trace()
    if plan.fallback:
        gamma = math.sqrt(L2) * R0 / math.sqrt(2.0 * prox.mu_d * const)
        trace.schedule = StageSchedule(float("nan"), [StageSpec(1, max(N - 1, 0), R0, R0, gamma)], variant)
        y, trace = _single_stage(oracle, setup, x0, R0, max(N, 1), gamma, record_every, trace,
                                 "budget too small for the adaptive scheme: single stage")
        return y, trace, plan
    stages = []
    for k in range(1, plan.m + 1):
        prev, target = R0 * 2.0 ** (-(k - 1)), R0 * 2.0 ** (-k)
        if variant == "stoca":
            gamma = R0 * R0 / prev * math.sqrt(L2 / (2.0 * const * prox.mu_d))
            stages.append(StageSpec(k, plan.N0, R0, target, gamma))
        else:
            gamma = prev * math.sqrt(L2 / (2.0 * prox.mu_d * const))
            stages.append(StageSpec(k, plan.N0, prev, target, gamma))
    trace.schedule = StageSchedule(float("nan"), stages, variant)
    y, trace, outputs = _run_stages(oracle, setup, x0, trace.schedule, record_every, trace)
    if variant == "adaptive":
        values = [oracle.value(p) for p in outputs]
        y = outputs[int(np.argmin(values))]
    return y, trace, plan


def adaptive_certificate(N, alpha, params: ConvexityParams, setup: ProxSetup):
    """High-probability accuracy of adaptive-s for caller-supplied (rho, mu_f).

    4 (16 / ((N0+1) mu_f^{2/rho}))^{rho/(2(rho-1))}
      (sqrt((L^2+sigma^2) A / (2 mu(d))) + sigma sqrt(3 ln(log2 N / (2 alpha))))^{rho/(rho-1)},
    with N0 the per-stage iteration count actually used.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    plan = adaptive_plan(N, setup)
    if plan.fallback:
        return math.inf
    rho, mu_f = params.rho, params.mu_f
    prox = setup.prox
    a = (16.0 / ((plan.N0 + 1) * mu_f ** (2.0 / rho))) ** (rho / (2.0 * (rho - 1.0)))
    b = math.sqrt((params.L ** 2 + params.sigma ** 2) * prox.A_d / (2.0 * prox.mu_d)) \
        + params.sigma * math.sqrt(3.0 * math.log(math.log2(N) / (2.0 * alpha)))
    return 4.0 * a * b ** (rho / (rho - 1.0))
