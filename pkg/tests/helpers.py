"""Random instance generators shared by tests."""
import numpy as np

from dualavg.geometry import ProxFunction
from dualavg.proxmap import SUPPORTED, FeasibleSet, LocalProblem, ProxSetup

COMBOS = [(pk, qk) for pk, sets in SUPPORTED.items() for qk in sets]


def make_set(kind, n, rng=None):
    if kind == "box":
        return FeasibleSet("box", n, lo=tuple([-1.0] * n), hi=tuple(np.linspace(0.5, 1.0, n)))
    if kind in ("euclidean_ball", "l1_ball"):
        return FeasibleSet(kind, n, radius=1.0)
    return FeasibleSet(kind, n)


def random_point(Q, rng, boundary_prob=0.25):
    n = Q.n
    on_boundary = rng.uniform() < boundary_prob
    if Q.kind == "full":
        return rng.standard_normal(n)
    if Q.kind == "simplex":
        x = rng.dirichlet(np.ones(n))
        if on_boundary:
            x[rng.integers(n)] = 0.0
            x /= x.sum()
        return x
    if Q.kind == "box":
        lo, hi = np.asarray(Q.lo), np.asarray(Q.hi)
        x = lo + (hi - lo) * rng.uniform(size=n)
        if on_boundary:
            i = rng.integers(n)
            x[i] = lo[i] if rng.uniform() < 0.5 else hi[i]
        return x
    g = rng.standard_normal(n)
    if Q.kind == "euclidean_ball":
        nrm = np.linalg.norm(g)
    else:
        nrm = np.abs(g).sum()
    scale = 1.0 if on_boundary else rng.uniform() ** (1.0 / n)
    return Q.radius * scale * g / nrm


def random_local_problem(prox_kind, set_kind, n, rng):
    Q = make_set(set_kind, n)
    setup = ProxSetup(ProxFunction(prox_kind, n), Q)
    z = random_point(Q, rng)
    R = float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
    beta = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
    return LocalProblem(setup, z, R, beta)


def random_dual(n, rng):
    return rng.standard_normal(n) * 10 ** rng.uniform(-1, 1.5)
