"""Dual solutions from the witnesses of a saddle oracle, and gap certificates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .da_core import StageRecord, Trace

STRONG_CONVEX_COEF = 8.5


@dataclass
class DualAggregate:
    w_bar: np.ndarray
    count: int
    stage: int


def aggregate_dual(last_stage) -> DualAggregate:
    """Plain mean of the dual witnesses over the final stage of a run.

    Accepts a :class:`Trace` (its last stage is used) or a stage record.
    """
    st = last_stage.stages[-1] if isinstance(last_stage, Trace) else last_stage
    if not isinstance(st, StageRecord) or st.witness_mean is None:
        raise ValueError("the stage carries no dual witnesses; run with witness collection on")
    return DualAggregate(np.array(st.witness_mean, dtype=float), st.witness_count, st.stage)


def dual_value(problem, w):
    """eta(w) = min_{x in Q} Psi(x, w), from the problem's closed form."""
    if not hasattr(problem, "dual_value"):
        raise ValueError("the problem has no saddle structure")
    return problem.dual_value(np.asarray(w, dtype=float))


def gap_constant(rho):
    """C(rho) = 1 + 3 (6^{1/(rho-1)} + 2^{1/rho} rho^{1/(rho-1)}) / rho^{rho/(rho-1)} + 6 / (2^{(rho-1)/rho} rho)."""
    if rho < 2:
        raise ValueError("rho must be >= 2")
    a = 1.0 / (rho - 1.0)
    return (1.0 + 3.0 * (6.0 ** a + 2.0 ** (1.0 / rho) * rho ** a) / rho ** (rho * a)
            + 6.0 / (2.0 ** ((rho - 1.0) / rho) * rho))


def gap_coefficient(rho):
    """Certified multiple of eps: 8.5 in the strongly convex case, C(rho) otherwise."""
    return STRONG_CONVEX_COEF if rho == 2 else gap_constant(rho)


def certify_gap(x_hat, w_bar, problem, eps, rho):
    """Duality gap f(x_hat) - eta(w_bar) against the certified multiple of eps."""
    gap = problem.value(np.asarray(x_hat, dtype=float)) - dual_value(problem, w_bar)
    bound = gap_coefficient(rho) * eps
    return {"gap": float(gap), "bound": float(bound), "pass": bool(gap <= bound),
            "general_constant": gap_constant(rho)}


def linearization_gap(queried, subgradients, candidates, mu_psi=0.0, rho=2.0):
    """l* = max over candidate points x of
    mean_i <f'(x_i), x_i - x> - mu_psi/2 ||x - x_bar||_2^rho,
    with x_bar the plain mean of the queried points.
    """
    X = np.asarray(queried, dtype=float)
    G = np.asarray(subgradients, dtype=float)
    C = np.asarray(candidates, dtype=float)
    inner = float(np.mean(np.einsum("ij,ij->i", G, X)))
    vals = inner - C @ G.mean(0)
    if mu_psi:
        vals = vals - 0.5 * mu_psi * np.linalg.norm(C - X.mean(0), axis=1) ** rho
    return float(vals.max())
