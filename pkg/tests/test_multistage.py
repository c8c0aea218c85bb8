import math
from fractions import Fraction

import numpy as np
import pytest

from dualavg.da_core import DAConfig, da_run
from dualavg.geometry import ProxFunction
from dualavg.multistage import (
    RunParams, adaptive_bound, adaptive_certificate, adaptive_plan, budget_threshold, eps_budget_bound,
    fixed_budget_bound, floor_down, floor_strict, run_adaptive, run_ball, run_fixed_dilation, schedule_ball_eps,
    schedule_budget, schedule_eps,
)
from dualavg.problems import ConvexityParams, NoiseModel, make_power_objective, stochastic_wrap
from dualavg.proxmap import FeasibleSet, LocalProblem, ProxSetup


def euclid(n, radius=1.0):
    Q = FeasibleSet("euclidean_ball", n, radius=radius)
    return Q, ProxSetup(ProxFunction("half_sq_euclid", n), Q)


def power_problem(rho, n=5, seed=0, radius=1.0):
    Q, setup = euclid(n, radius)
    rng = np.random.default_rng(seed)
    x_star = rng.standard_normal(n)
    x_star *= 0.6 * radius / np.linalg.norm(x_star)
    return make_power_objective(rho, x_star, Q), setup


def test_floor_helpers_at_integers():
    assert floor_strict(3.0) == 2 and floor_strict(3.2) == 3 and floor_strict(0.5) == 0
    assert floor_down(3.0) == 3 and floor_down(2.9999999999999) == 3 and floor_down(2.5) == 2
    assert floor_strict(math.log2(8.0)) == 2
    assert floor_strict(3.0000000000001) == 2


def test_schedule_example():
    _, setup = euclid(3)
    s = schedule_ball_eps(ConvexityParams(2.0, 1.0, 1.0), setup, 1.0, 0.125)
    assert s.tau == 1.0 and s.m == 3
    assert [st.N for st in s.stages] == [4, 8, 16]
    assert [st.radius for st in s.stages] == pytest.approx([1.0, 2 ** -0.5, 0.5])
    assert [st.gamma for st in s.stages] == pytest.approx([1.0, 2 ** -0.5, 0.5])


def test_single_stage_when_eps_is_coarse():
    _, setup = euclid(3)
    p = ConvexityParams(2.0, 1.0, 1.0)
    assert schedule_ball_eps(p, setup, 1.0, 1.0).m == 1
    assert schedule_ball_eps(p, setup, 1.0, 5.0).m == 1
    with pytest.raises(ValueError):
        schedule_ball_eps(ConvexityParams(2.0, 0.0, 1.0), setup, 1.0, 0.1)


def test_rho3_lengths_match_exact_rederivation():
    # independent derivation: N_k = max{n : n^3 <= 2^{4k} base^3} with rational base
    L, A, mu_d, mu_f, R0 = Fraction(3, 2), Fraction(1, 2), Fraction(1), Fraction(2, 3), Fraction(1)
    base = 4 * L ** 2 * A / (mu_f ** 2 * mu_d * R0 ** 4)
    expected = []
    for k in range(1, 9):
        target = Fraction(2) ** (4 * k) * base ** 3
        n = int(float(target) ** (1 / 3)) + 2
        while Fraction(n) ** 3 > target:
            n -= 1
        expected.append(n)
    _, setup = euclid(2)
    s = schedule_ball_eps(ConvexityParams(3.0, float(mu_f), float(L)), setup, 1.0, 2.0 ** -8 * float(mu_f) * 0.99)
    assert s.m == 9
    assert [st.N for st in s.stages][:8] == expected


@pytest.mark.parametrize("rho,eps", [(2.0, 1e-3), (3.0, 1e-2), (2.0, 1e-2)])
def test_run_ball_reaches_eps_within_budget(rho, eps):
    f, setup = power_problem(rho, seed=int(rho))
    x0 = np.zeros(5)
    R0 = float(np.linalg.norm(f.x_star - x0))
    rp = RunParams(f.params, setup, x0, R0 * 1.01, mode="eps", eps=eps)
    x_hat, trace = run_ball(f, rp)
    assert f.value(x_hat) - f.f_star <= eps
    assert f.calls == trace.oracle_calls == trace.schedule.calls
    assert f.calls <= eps_budget_bound(f.params, setup.prox, eps)
    for k, st in enumerate(trace.stages, start=1):
        Rk_rho = 2.0 ** -k * rp.R0 ** rho
        assert np.linalg.norm(st.x_out - f.x_star) ** rho <= Rk_rho * (1 + 1e-9)
        assert st.delta_observed <= f.params.mu_f * Rk_rho * (1 + 1e-9)


def test_schedules_are_monotone():
    _, setup = euclid(3)
    p = ConvexityParams(2.0, 0.5, 2.0)
    ball = schedule_eps(p, setup, 1.0, 1e-4)
    fixed = schedule_eps(p, setup, 1.0, 1e-4, scheme="fixed_dilation")
    assert all(a.N < b.N for a, b in zip(ball.stages, ball.stages[1:]))
    assert all(a.gamma > b.gamma for a, b in zip(ball.stages, ball.stages[1:]))
    assert all(a.gamma < b.gamma for a, b in zip(fixed.stages, fixed.stages[1:]))
    # Euclidean prox has C(d) = A(d): stage lengths coincide, only gains and radii differ
    assert [s.N for s in ball.stages] == [s.N for s in fixed.stages]
    assert all(s.radius == 1.0 for s in fixed.stages)


def test_budget_fallback_matches_plain_da():
    f, setup = power_problem(2.0, seed=3)
    x0 = np.zeros(5)
    N = 7
    assert N < budget_threshold(f.params, setup, 1.0)
    x_hat, trace = run_ball(f, RunParams(f.params, setup, x0, 1.0, mode="budget", N=N))
    g, _ = power_problem(2.0, seed=3)
    gamma = f.params.L / math.sqrt(2 * setup.prox.mu_d * setup.prox.A_d)
    ref, _, _ = da_run(g, LocalProblem(setup, x0, 1.0), DAConfig(N - 1, gamma=gamma))
    np.testing.assert_array_equal(x_hat, ref)
    assert f.calls == N and trace.notes


@pytest.mark.parametrize("rho", [2.0, 3.0])
@pytest.mark.parametrize("N", [300, 3000, 20000])
def test_budget_mode_bound_and_accounting(rho, N):
    f, setup = power_problem(rho, seed=N)
    x0 = np.zeros(5)
    rp = RunParams(f.params, setup, x0, 1.0, mode="budget", N=N)
    x_hat, trace = run_ball(f, rp)
    assert f.calls <= N
    assert f.value(x_hat) - f.f_star <= fixed_budget_bound(f.params, setup.prox, N)


def test_budget_schedule_prefix():
    _, setup = euclid(3)
    p = ConvexityParams(2.0, 1.0, 1.0)
    s = schedule_budget(p, setup, 1.0, 60)
    assert [st.N for st in s.stages] == [4, 8, 16, 32][: s.m]
    assert s.calls <= 60 and s.calls + 64 + 1 > 60


def test_fixed_dilation_deterministic():
    f, setup = power_problem(2.0, seed=7)
    x0 = np.zeros(5)
    rp = RunParams(f.params, setup, x0, 2.0, mode="eps", eps=1e-3, scheme="fixed_dilation")
    x_hat, trace = run_fixed_dilation(f, rp)
    assert f.value(x_hat) - f.f_star <= 1e-3
    assert f.calls <= eps_budget_bound(f.params, setup.prox, 1e-3, const=setup.prox.C_d)
    assert all(st.radius == 2.0 for st in trace.stages)
    with pytest.raises(ValueError):
        RunParams(f.params, ProxSetup(ProxFunction("entropy_sym", 5), FeasibleSet("simplex", 5)),
                  np.full(5, 0.2), 2.0, eps=1e-2, scheme="fixed_dilation")


def test_fixed_dilation_stochastic_expectation_and_contraction():
    n, N, trials = 3, 2000, 60
    base, setup = power_problem(2.0, n=n, seed=11)
    sigma = base.params.L
    params = base.params.with_sigma(sigma)
    gaps, dists = [], []
    for t in range(trials):
        f, _ = power_problem(2.0, n=n, seed=11)
        g = stochastic_wrap(f, NoiseModel("bounded", sigma), np.random.default_rng([11, t]))
        rp = RunParams(params, setup, np.zeros(n), 2.0, mode="budget", N=N, scheme="fixed_dilation",
                       stochastic=True)
        x_hat, trace = run_fixed_dilation(g, rp)
        assert g.calls <= N
        gaps.append(f.value(x_hat) - f.f_star)
        dists.append([np.linalg.norm(st.x_out - f.x_star) ** 2 for st in trace.stages])
    bound = fixed_budget_bound(params, setup.prox, N, const=setup.prox.C_d, L2=sigma ** 2 + params.L ** 2)
    se = np.std(gaps, ddof=1) / math.sqrt(trials)
    assert np.mean(gaps) <= bound + 2 * se
    mean_d = np.mean(np.array(dists), axis=0)
    for k, d in enumerate(mean_d, start=1):
        assert d <= 2.0 ** -k * 4.0


def test_adaptive_plan():
    _, setup = euclid(3)
    plan = adaptive_plan(10 ** 5, setup)
    m = math.floor(0.5 * math.log2(2 * 1e5 / math.log2(1e5))) - 1
    assert plan.m == m and plan.N0 == 10 ** 5 // m - 1
    assert adaptive_plan(3, setup).fallback
    assert adaptive_plan(8, setup).fallback


@pytest.mark.parametrize("N", [1000, 10000])
def test_adaptive_deterministic_bound(N):
    f, setup = power_problem(2.0, seed=N)
    x_hat, trace, plan = run_adaptive(f, N, setup, f.params.L, 2.0, np.zeros(5))
    assert f.calls <= N and not plan.fallback
    assert f.value(x_hat) - f.f_star <= adaptive_bound(f.params, setup.prox, N)
    assert f.value(x_hat) == pytest.approx(min(st.f_out for st in trace.stages))


def test_adaptive_near_flat_objective():
    Q, setup = euclid(4)
    f = make_power_objective(2.0, np.array([0.3, 0, 0, 0]), Q)
    # declare a tiny modulus: the bound is then loose, and the run must still satisfy it
    tiny = ConvexityParams(2.0, 1e-4, f.params.L)
    x_hat, _, _ = run_adaptive(f, 4000, setup, f.params.L, 2.0, np.zeros(4))
    assert f.value(x_hat) - f.f_star <= adaptive_bound(tiny, setup.prox, 4000)


@pytest.mark.parametrize("variant", ["stoca", "adaptive-s"])
def test_stochastic_adaptive_variants_run(variant):
    f, setup = power_problem(2.0, n=3, seed=5)
    g = stochastic_wrap(f, NoiseModel("bounded", 0.5), np.random.default_rng(5))
    x_hat, trace, plan = run_adaptive(g, 3000, setup, f.params.L, 2.0, np.zeros(3), variant=variant, sigma=0.5)
    assert g.calls <= 3000
    np.testing.assert_array_equal(x_hat, trace.stages[-1].x_out)
    if variant == "stoca":
        assert all(st.radius == 2.0 for st in trace.stages)
    else:
        assert [st.radius for st in trace.stages] == pytest.approx([2.0 * 2.0 ** -k for k in range(plan.m)])


def test_adaptive_fallback_for_tiny_budget():
    f, setup = power_problem(2.0, seed=1)
    x_hat, trace, plan = run_adaptive(f, 3, setup, f.params.L, 1.0, np.zeros(5))
    assert plan.fallback and f.calls == 3 and trace.notes


def test_certificate_formula():
    _, setup = euclid(3)
    p = ConvexityParams(2.0, 1.0, 1.0, 1.0)
    N, alpha = 10 ** 4, 0.1
    plan = adaptive_plan(N, setup)
    expected = 4 * (16 / (plan.N0 + 1)) * (math.sqrt(2 * 0.5 / 2) + math.sqrt(3 * math.log(math.log2(N) / 0.2))) ** 2
    assert adaptive_certificate(N, alpha, p, setup) == pytest.approx(expected)
    assert adaptive_certificate(3, alpha, p, setup) == math.inf


def test_adaptive_bound_formula():
    prox = ProxFunction("half_sq_euclid", 3)
    p = ConvexityParams(2.0, 1.0, 1.0)
    assert adaptive_bound(p, prox, 1024) == pytest.approx(2 * 16 * 0.5 * 10 / 1024)
    assert fixed_budget_bound(p, prox, 100) == pytest.approx(2 * 8 * 0.5 / 100)
    assert eps_budget_bound(p, prox, 0.1) == pytest.approx(16 * 0.5 / 0.1)
