"""Inexact projected gradient method for squared-loss GW transport.

Each outer iteration takes a gradient step on the quadratic objective and
projects back toward the transport polytope, but the projection subproblem
is solved only approximately: the inner dual solve stops as soon as the
verifiable condition

    || A Pi_{k+1} - r ||_2 <= eps_k / (1 + ||y_{k+1}||_2)

holds, where eps_k is a summable tolerance sequence.  Iterates may therefore
be slightly infeasible; a feasible "shadow" companion obtained by rounding is
available as an opt-in per-iteration diagnostic, together with the
approximate-descent bound it must satisfy.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta

from .gw_core import (
    CostMatrix,
    Marginals,
    check_coupling,
    gw_constant,
    gw_gradient,
    gw_quadratic,
    lipschitz_bound,
    marginal_residual,
    quadratic_and_gradient,
)
from .polytope_proj import round_to_polytope, solve_projection_exact, solve_projection_inexact

__all__ = [
    "IpgConfig",
    "IterationRecord",
    "SolverTrace",
    "tolerance_schedule",
    "ipg_solve",
    "stationarity_measure",
    "verify_ipg_trace",
]

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max_iter"
STATUS_INNER_FAILURE = "inner_failure"


def _as_array(x):
    if isinstance(x, CostMatrix):
        return x.entries
    if isinstance(x, Marginals):
        return x.weights
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class IpgConfig:
    """Hyperparameters of the outer loop.

    ``gamma_factor`` scales the smoothness constant to the inverse step size
    gamma = gamma_factor * L_f and must exceed 1.  The projection tolerances
    follow eps_k = eps_scale * (k + 1) ** (-alpha) with alpha > 1 so that the
    sequence is summable.
    """

    gamma_factor: float = 1.01
    alpha: float = 3.0
    eps_scale: float = 1.0
    max_iter: int = 5000
    rel_tol: float = 1e-9
    record_shadow: bool = False
    max_inner: int = 100000

    def __post_init__(self):
        if self.gamma_factor <= 1.0:
            raise ValueError("gamma_factor must be > 1 so that gamma > L_f")
        if self.alpha <= 1.0:
            raise ValueError("alpha must be > 1 for a summable tolerance sequence")
        if self.eps_scale <= 0.0:
            raise ValueError("eps_scale must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    """Quantities describing one completed outer step.

    Record k covers the step producing iterate k+1: objective value, energy,
    feasibility residual and dual norm all refer to the new iterate, and
    ``eps_k`` is the tolerance the step ran under, so the inexact condition
    residual_l2 * (1 + dual_norm) <= eps_k can be re-checked from the record
    alone.  ``shadow_f``/``shadow_dist`` describe the rounded feasible
    companion of the new iterate when shadow recording is on.
    """

    k: int
    f_value: float
    energy: float
    residual_l2: float
    successive_change: float
    elapsed_s: float
    dual_norm: float | None = None
    eps_k: float | None = None
    inner_iterations: int = 0
    shadow_f: float | None = None
    shadow_dist: float | None = None


@dataclass
class SolverTrace:
    """Per-iteration records plus the run constants needed to audit them."""

    records: list = field(default_factory=list)
    status: str = STATUS_MAX_ITER
    gamma: float | None = None
    lipschitz: float | None = None
    alpha: float | None = None
    eps_scale: float | None = None
    initial_f: float | None = None
    initial_energy: float | None = None
    initial_residual_l2: float | None = None
    initial_shadow_f: float | None = None
    initial_shadow_dist: float | None = None

    @property
    def iterations(self):
        return len(self.records)

    @property
    def final_record(self):
        return self.records[-1] if self.records else None


def tolerance_schedule(k, alpha=3.0, eps_scale=1.0):
    """Projection tolerance eps_k = eps_scale * (k + 1) ** (-alpha).

    ``alpha`` must exceed 1; otherwise the tolerances are not summable and
    the convergence guarantees of the outer loop are void.
    """
    if k < 0:
        raise ValueError("iteration index must be nonnegative")
    if alpha <= 1.0:
        raise ValueError("alpha must be > 1 (the tolerance sequence must be summable)")
    if eps_scale <= 0.0:
        raise ValueError("eps_scale must be positive")
    return eps_scale * float(k + 1) ** (-alpha)


def tolerance_series_total(alpha, eps_scale):
    """Exact infinite sum of the tolerance schedule, eps_scale * zeta(alpha)."""
    return eps_scale * float(zeta(alpha))


def ipg_solve(c1, c2, a, b, pi0, config=None):
    """Run the inexact projected gradient method.

    Parameters
    ----------
    c1, c2 : square cost matrices (arrays or CostMatrix)
    a, b : marginal weights (arrays or Marginals)
    pi0 : array (n, m)
        Nonnegative starting coupling; feasibility is not required.
    config : IpgConfig

    Returns
    -------
    (pi, trace) : the final (possibly slightly infeasible) iterate and the
    full per-iteration trace.  The feasible companion of any iterate is one
    ``round_to_polytope`` call away; with ``config.record_shadow`` its
    objective value and distance are already in the trace.
    """
    config = config or IpgConfig()
    c1 = _as_array(c1)
    c2 = _as_array(c2)
    a = _as_array(a)
    b = _as_array(b)
    pi = check_coupling(pi0).copy()
    n, m = pi.shape
    if c1.shape != (n, n) or c2.shape != (m, m):
        raise ValueError(
            f"cost shapes {c1.shape}, {c2.shape} do not conform to coupling {pi.shape}"
        )
    symmetric = bool(np.array_equal(c1, c1.T) and np.array_equal(c2, c2.T))

    lip = lipschitz_bound(c1, c2)
    gamma = config.gamma_factor * lip if lip > 0.0 else 1.0
    const = gw_constant(c1, c2, a, b)

    def f_and_grad(x):
        return quadratic_and_gradient(x, c1, c2, symmetric=symmetric)

    t0 = time.perf_counter()
    f_cur, grad = f_and_grad(pi)
    trace = SolverTrace(
        status=STATUS_MAX_ITER,
        gamma=gamma,
        lipschitz=lip,
        alpha=config.alpha,
        eps_scale=config.eps_scale,
        initial_f=f_cur,
        initial_energy=const + 2.0 * f_cur,
        initial_residual_l2=marginal_residual(pi, a, b),
    )
    if config.record_shadow:
        shadow = round_to_polytope(pi, a, b)
        trace.initial_shadow_f = gw_quadratic(shadow, c1, c2)
        trace.initial_shadow_dist = float(np.linalg.norm(shadow - pi))

    y = np.zeros(n + m)
    for k in range(config.max_iter):
        eps_k = tolerance_schedule(k, config.alpha, config.eps_scale)
        z = pi - grad / gamma
        proj = solve_projection_inexact(
            z, a, b, eps_k, y_warm=y, max_inner=config.max_inner
        )
        if not proj.converged:
            trace.status = STATUS_INNER_FAILURE
            break
        pi_new = proj.coupling
        y = proj.dual.vector
        change = float(np.linalg.norm(pi_new - pi))
        rel = change / max(1.0, float(np.linalg.norm(pi)))
        f_new, grad_new = f_and_grad(pi_new)
        shadow_f = shadow_dist = None
        if config.record_shadow:
            shadow = round_to_polytope(pi_new, a, b)
            shadow_f = gw_quadratic(shadow, c1, c2)
            shadow_dist = float(np.linalg.norm(shadow - pi_new))
        trace.records.append(
            IterationRecord(
                k=k,
                f_value=f_new,
                energy=const + 2.0 * f_new,
                residual_l2=proj.residual_l2,
                dual_norm=proj.dual.norm,
                eps_k=eps_k,
                inner_iterations=proj.inner_iterations,
                successive_change=change,
                elapsed_s=time.perf_counter() - t0,
                shadow_f=shadow_f,
                shadow_dist=shadow_dist,
            )
        )
        pi, f_cur, grad = pi_new, f_new, grad_new
        if rel <= config.rel_tol:
            trace.status = STATUS_CONVERGED
            break
    return pi, trace


def stationarity_measure(pi, c1, c2, a, b, gamma, tol=1e-12):
    """Fixed-point residual of the exact projected gradient map.

    Returns ||pi - P|| where P is the exact projection of
    pi - (1/gamma) grad f(pi) onto U(a, b); zero exactly at couplings that
    are stationary for the constrained problem.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    c1 = _as_array(c1)
    c2 = _as_array(c2)
    a = _as_array(a)
    b = _as_array(b)
    pi = np.asarray(pi, dtype=np.float64)
    z = pi - gw_gradient(pi, c1, c2) / gamma
    proj = solve_projection_exact(z, a, b, tol=tol)
    return float(np.linalg.norm(pi - proj.coupling))


def descent_slack(trace, n_plus_m, k):
    """Allowed objective increase xi_k of the shadow-sequence descent bound.

    Uses eps_{-1} = ||A pi_0 - r||_2 from the trace and the exact infinite
    tolerance sum for E.
    """
    recs = trace.records
    eps_k = recs[k].eps_k
    eps_prev = trace.initial_residual_l2 if k == 0 else recs[k - 1].eps_k
    total = trace.initial_residual_l2 + tolerance_series_total(
        trace.alpha, trace.eps_scale
    )
    gamma = trace.gamma
    return 4.0 * gamma * n_plus_m * (eps_prev**2 + eps_k**2) + (
        6.0 * total + 4.0
    ) * 2.0 * gamma * n_plus_m * eps_k


def verify_ipg_trace(trace, n, m):
    """Audit a finished trace against the invariants the method guarantees.

    Checks, from the recorded fields alone: the inexact condition at every
    step, termwise residual domination by the tolerance schedule, shadow
    proximity, and (when shadows were recorded) the approximate sufficient
    descent property with the slack computed from the run's own constants.
    Raises ``AssertionError`` on the first violation.
    """
    n_plus_m = n + m
    prox_factor = 2.0 * np.sqrt(n_plus_m)
    for rec in trace.records:
        if rec.residual_l2 * (1.0 + rec.dual_norm) > rec.eps_k:
            raise AssertionError(
                f"inexact condition violated at k={rec.k}: "
                f"{rec.residual_l2} * (1 + {rec.dual_norm}) > {rec.eps_k}"
            )
        if rec.residual_l2 > rec.eps_k:
            raise AssertionError(f"residual exceeds eps_k at k={rec.k}")
        if rec.shadow_dist is not None:
            bound = prox_factor * rec.residual_l2
            if rec.shadow_dist > bound * (1.0 + 1e-9) + 1e-15:
                raise AssertionError(
                    f"shadow proximity violated at k={rec.k}: "
                    f"{rec.shadow_dist} > {bound}"
                )
    if trace.initial_shadow_dist is not None:
        bound = prox_factor * trace.initial_residual_l2
        if trace.initial_shadow_dist > bound * (1.0 + 1e-9) + 1e-15:
            raise AssertionError("shadow proximity violated at the initial iterate")
    if trace.records and trace.initial_shadow_f is not None:
        shadow_fs = [trace.initial_shadow_f] + [r.shadow_f for r in trace.records]
        for k in range(len(trace.records)):
            slack = descent_slack(trace, n_plus_m, k)
            allowed = shadow_fs[k] + slack + 1e-9 * max(1.0, abs(shadow_fs[k]))
            if shadow_fs[k + 1] > allowed:
                raise AssertionError(
                    f"approximate descent violated at k={k}: "
                    f"{shadow_fs[k + 1]} > {shadow_fs[k]} + {slack}"
                )
