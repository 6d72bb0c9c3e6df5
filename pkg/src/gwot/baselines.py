"""Baseline GW solvers: conditional gradient and three entropic methods.

The conditional-gradient solver linearizes the quadratic objective and
solves exact discrete OT subproblems with a transportation network simplex,
so its iterates are exactly feasible convex combinations of polytope
vertices.  The entropic solvers (projected gradient, proximal point, and
Bregman alternating projection) replace the exact subproblem with
matrix-scaling steps at a regularization level ``epsilon``; their plans are
dense and only approximately feasible.  Numerical blow-ups (e.g. Bregman
scaling at very small epsilon) raise ``SolverFailure`` so the harness can
record the run as failed instead of silently patching it.
"""

import time
from dataclasses import dataclass

import numpy as np

from ._backend import network_simplex_core
from .gw_core import (
    CostMatrix,
    Marginals,
    check_coupling,
    gw_constant,
    marginal_residual,
    quadratic_and_gradient,
)
from .ipg import (
    STATUS_CONVERGED,
    STATUS_MAX_ITER,
    IterationRecord,
    SolverTrace,
)

__all__ = [
    "SolverFailure",
    "EntropicConfig",
    "OtPlan",
    "ot_network_simplex",
    "cg_solve",
    "sinkhorn",
    "epgd_solve",
    "ppa_solve",
    "bapg_solve",
]

MASS_BALANCE_TOL = 1e-10


class SolverFailure(RuntimeError):
    """Numerical failure inside a solver; the harness records it as a failed run."""


def _as_array(x):
    if isinstance(x, CostMatrix):
        return x.entries
    if isinstance(x, Marginals):
        return x.weights
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class EntropicConfig:
    """Shared knobs of the entropic baselines."""

    epsilon: float
    max_iter: int = 5000
    sinkhorn_tol: float = 1e-9
    sinkhorn_max_iter: int = 1000
    outer_tol: float = 1e-9

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class OtPlan:
    """Exact discrete OT solution: a basic feasible plan and its cost."""

    plan: np.ndarray
    objective: float
    basis_size: int


def ot_network_simplex(cost, a, b, max_pivots=None):
    """Exact discrete optimal transport by the transportation simplex.

    Maintains a spanning-tree basis starting from the northwest-corner plan;
    pivots on the most negative reduced cost with a Bland's-rule fallback
    after long runs of degenerate pivots, so cycling cannot occur.
    Degenerate basic variables are carried at value zero.

    Raises
    ------
    ValueError if the marginal masses differ beyond 1e-10; RuntimeError with
    diagnostics if the pivot cap (default 10 n m) is exceeded.
    """
    cost = np.ascontiguousarray(_as_array(cost), dtype=np.float64)
    a = _as_array(a)
    b = _as_array(b)
    if not np.isfinite(cost).all():
        raise ValueError("cost matrix has non-finite entries")
    n, m = cost.shape
    if a.shape != (n,) or b.shape != (m,):
        raise ValueError("marginal lengths do not match the cost matrix")
    if abs(a.sum() - b.sum()) > MASS_BALANCE_TOL:
        raise ValueError(
            f"marginal masses differ: sum(a)={a.sum()!r} vs sum(b)={b.sum()!r}"
        )
    if max_pivots is None:
        max_pivots = 10 * n * m
    flow, _, _, _ = network_simplex_core(cost, a, b, max_pivots)
    return OtPlan(
        plan=flow,
        objective=float(np.vdot(cost, flow)),
        basis_size=int(np.count_nonzero(flow)),
    )


def _require_feasible_start(pi0, a, b, tol=1e-8):
    pi0 = check_coupling(pi0)
    if marginal_residual(pi0, a, b) > tol:
        raise ValueError("starting coupling is not feasible for the marginals")
    return pi0.copy()


def cg_solve(c1, c2, a, b, pi0, max_iter=5000, tol=1e-9):
    """Conditional gradient (Frank-Wolfe) with exact OT subproblems.

    Each step solves min <grad f(pi), S> over the polytope with the network
    simplex and moves along D = S - pi with the closed-form step minimizing
    the 1-d quadratic q t^2 + l t on [0, 1], where l = <grad f, D> and
    q = -<c1 D c2, D>.  Stops when the Frank-Wolfe gap <grad f, pi - S>
    drops to ``tol``.  Iterates stay exactly feasible.
    """
    c1 = _as_array(c1)
    c2 = _as_array(c2)
    a = _as_array(a)
    b = _as_array(b)
    pi = _require_feasible_start(pi0, a, b)
    symmetric = bool(np.array_equal(c1, c1.T) and np.array_equal(c2, c2.T))
    const = gw_constant(c1, c2, a, b)

    t0 = time.perf_counter()
    f_cur, grad = quadratic_and_gradient(pi, c1, c2, symmetric=symmetric)
    trace = SolverTrace(
        status=STATUS_MAX_ITER,
        initial_f=f_cur,
        initial_energy=const + 2.0 * f_cur,
        initial_residual_l2=marginal_residual(pi, a, b),
    )
    for k in range(max_iter):
        vertex = ot_network_simplex(grad, a, b).plan
        gap = float(np.vdot(grad, pi - vertex))
        if gap <= tol:
            trace.status = STATUS_CONVERGED
            break
        d = vertex - pi
        lin = -gap
        # exact quadratic coefficient of t -> f(pi + t d)
        quad = -float(np.vdot(c1 @ d @ c2, d))
        if quad > 0.0:
            step = min(1.0, max(0.0, -lin / (2.0 * quad)))
        else:
            step = 1.0 if quad + lin < 0.0 else 0.0
        pi_new = pi + step * d
        change = float(np.linalg.norm(pi_new - pi))
        f_new, grad_new = quadratic_and_gradient(pi_new, c1, c2, symmetric=symmetric)
        trace.records.append(
            IterationRecord(
                k=k,
                f_value=f_new,
                energy=const + 2.0 * f_new,
                residual_l2=marginal_residual(pi_new, a, b),
                successive_change=change,
                elapsed_s=time.perf_counter() - t0,
            )
        )
        pi, f_cur, grad = pi_new, f_new, grad_new
    return pi, trace


def sinkhorn(
    cost,
    a,
    b,
    epsilon,
    max_iter=1000,
    tol=1e-9,
    potentials=None,
    return_potentials=False,
):
    """Entropic OT by log-domain Sinkhorn scaling.

    Returns diag(u) K diag(v) with K = exp(-cost / epsilon), alternating the
    row and column scalings in log space (log-sum-exp stabilized).  After
    every column update the column marginals hold to machine precision, so
    the stopping rule monitors the l1 error of the row marginals against
    ``tol``.  Optional ``potentials`` warm-start the dual variables.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cost = _as_array(cost)
    a = _as_array(a)
    b = _as_array(b)
    if (a <= 0).any() or (b <= 0).any():
        raise ValueError("entropic OT requires strictly positive marginals")
    log_k = -cost / epsilon
    if not np.isfinite(log_k).all():
        raise SolverFailure("non-finite kernel: epsilon too small for the cost range")
    log_a = np.log(a)
    log_b = np.log(b)
    if potentials is None:
        f = np.zeros(a.shape[0])
        g = np.zeros(b.shape[0])
    else:
        f, g = potentials[0].copy(), potentials[1].copy()

    def lse_rows(mat):
        mx = mat.max(axis=1)
        return np.log(np.exp(mat - mx[:, None]).sum(axis=1)) + mx

    def lse_cols(mat):
        mx = mat.max(axis=0)
        return np.log(np.exp(mat - mx[None, :]).sum(axis=0)) + mx

    for _ in range(max_iter):
        row_lse = lse_rows(log_k + g[None, :])
        err = float(np.abs(np.exp(f + row_lse) - a).sum())
        if err <= tol:
            break
        f = log_a - row_lse
        g = log_b - lse_cols(log_k + f[:, None])
    plan = np.exp(log_k + f[:, None] + g[None, :])
    if not np.isfinite(plan).all():
        raise SolverFailure("non-finite transport plan after stabilized scaling")
    if return_potentials:
        return plan, (f, g)
    return plan


def _entropic_outer_loop(c1, c2, a, b, pi0, config, proximal):
    """Shared driver of the entropic PGD / proximal-point solvers."""
    c1 = _as_array(c1)
    c2 = _as_array(c2)
    a = _as_array(a)
    b = _as_array(b)
    pi = _require_feasible_start(pi0, a, b)
    if (pi <= 0).any():
        raise ValueError("entropic solvers require a strictly positive start")
    symmetric = bool(np.array_equal(c1, c1.T) and np.array_equal(c2, c2.T))
    const = gw_constant(c1, c2, a, b)

    t0 = time.perf_counter()
    f_cur, grad = quadratic_and_gradient(pi, c1, c2, symmetric=symmetric)
    trace = SolverTrace(
        status=STATUS_MAX_ITER,
        initial_f=f_cur,
        initial_energy=const + 2.0 * f_cur,
        initial_residual_l2=marginal_residual(pi, a, b),
    )
    pots = None
    for k in range(config.max_iter):
        cost = grad - config.epsilon * np.log(pi) if proximal else grad
        pi_new, pots = sinkhorn(
            cost,
            a,
            b,
            config.epsilon,
            max_iter=config.sinkhorn_max_iter,
            tol=config.sinkhorn_tol,
            potentials=pots,
            return_potentials=True,
        )
        change = float(np.linalg.norm(pi_new - pi))
        rel = change / max(1.0, float(np.linalg.norm(pi)))
        f_new, grad_new = quadratic_and_gradient(pi_new, c1, c2, symmetric=symmetric)
        trace.records.append(
            IterationRecord(
                k=k,
                f_value=f_new,
                energy=const + 2.0 * f_new,
                residual_l2=marginal_residual(pi_new, a, b),
                successive_change=change,
                elapsed_s=time.perf_counter() - t0,
            )
        )
        pi, f_cur, grad = pi_new, f_new, grad_new
        if rel <= config.outer_tol:
            trace.status = STATUS_CONVERGED
            break
    return pi, trace


def epgd_solve(c1, c2, a, b, pi0, config):
    """Entropic projected gradient descent.

    Each outer step solves an entropic OT problem whose cost is the current
    GW gradient, i.e. a Sinkhorn projection of the gradient step.  Stops on
    relative successive change or ``max_iter``.
    """
    return _entropic_outer_loop(c1, c2, a, b, pi0, config, proximal=False)


def ppa_solve(c1, c2, a, b, pi0, config):
    """Entropic proximal point algorithm.

    Like ``epgd_solve`` but with a KL proximal term anchored at the current
    iterate: the scaling kernel is multiplied entrywise by the current plan,
    i.e. the Sinkhorn cost is grad - epsilon * log(pi).
    """
    return _entropic_outer_loop(c1, c2, a, b, pi0, config, proximal=True)


def bapg_solve(c1, c2, a, b, pi0, config):
    """Bregman alternating projected gradient (single loop, relaxed).

    Alternates a multiplicative gradient scaling with an exact row rescale,
    then another gradient scaling with an exact column rescale.  The
    returned plan generally violates one marginal; with very small epsilon
    the scaling overflows and the run fails.
    """
    c1 = _as_array(c1)
    c2 = _as_array(c2)
    a = _as_array(a)
    b = _as_array(b)
    pi = _require_feasible_start(pi0, a, b)
    if (pi <= 0).any():
        raise ValueError("Bregman scaling requires a strictly positive start")
    symmetric = bool(np.array_equal(c1, c1.T) and np.array_equal(c2, c2.T))
    const = gw_constant(c1, c2, a, b)

    t0 = time.perf_counter()
    f0, _ = quadratic_and_gradient(pi, c1, c2, symmetric=symmetric)
    trace = SolverTrace(
        status=STATUS_MAX_ITER,
        initial_f=f0,
        initial_energy=const + 2.0 * f0,
        initial_residual_l2=marginal_residual(pi, a, b),
    )
    for k in range(config.max_iter):
        pi_prev = pi
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            _, grad = quadratic_and_gradient(pi, c1, c2, symmetric=symmetric)
            pi = pi * np.exp(-grad / config.epsilon)
            pi *= (a / pi.sum(axis=1))[:, None]
            _, grad = quadratic_and_gradient(pi, c1, c2, symmetric=symmetric)
            pi = pi * np.exp(-grad / config.epsilon)
            pi *= (b / pi.sum(axis=0))[None, :]
        if not np.isfinite(pi).all():
            raise SolverFailure(
                f"Bregman scaling overflowed at iteration {k} (epsilon={config.epsilon})"
            )
        change = float(np.linalg.norm(pi - pi_prev))
        rel = change / max(1.0, float(np.linalg.norm(pi_prev)))
        f_new, _ = quadratic_and_gradient(pi, c1, c2, symmetric=symmetric)
        trace.records.append(
            IterationRecord(
                k=k,
                f_value=f_new,
                energy=const + 2.0 * f_new,
                residual_l2=marginal_residual(pi, a, b),
                successive_change=change,
                elapsed_s=time.perf_counter() - t0,
            )
        )
        if rel <= config.outer_tol:
            trace.status = STATUS_CONVERGED
            break
    return pi, trace
