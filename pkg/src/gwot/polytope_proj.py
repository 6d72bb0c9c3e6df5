"""Euclidean projection machinery for the transport polytope U(a, b).

The projection of a point Z onto U(a, b) is computed through its dual: an
unconstrained smooth convex problem in the row/column multipliers y = (u, v),

    g(y) = 0.5 * || max(0, A* y + Z) ||_F^2 - <r, y>,      r = (a, b),

whose gradient is the marginal residual of the nonnegative primal candidate
max(0, A* y + Z).  The inner solver is an accelerated gradient method with
function-value adaptive restart and the verifiable stopping rule

    || A Pi - r ||_2 <= eps / (1 + ||y||_2),

which can be re-checked after the fact from the returned fields alone.
"""

from dataclasses import dataclass

import numpy as np

from ._backend import dual_eval
from .gw_core import apply_A_adjoint, marginal_residual

__all__ = [
    "DualVector",
    "ProjectionResult",
    "primal_from_dual",
    "dual_value",
    "dual_gradient",
    "solve_projection_inexact",
    "solve_projection_exact",
    "round_to_polytope",
]

# eps <= EXACT_EPS asks for an exact solve, unattainable in floating point;
# it is mapped to a plain residual tolerance of EXACT_EPS instead.
EXACT_EPS = 1e-14


@dataclass(frozen=True)
class DualVector:
    """Row and column multipliers of the marginal constraints."""

    u: np.ndarray
    v: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.u, self.v])

    @property
    def norm(self):
        return float(np.sqrt(self.u @ self.u + self.v @ self.v))


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of one projection subproblem solve.

    ``coupling`` is max(0, A* dual + Z) for the shifted point Z the solve ran
    against (for the exact oracle it is additionally repaired to be exactly
    feasible), and ``residual_l2`` is ||A coupling - r||_2.
    """

    coupling: np.ndarray
    dual: DualVector
    residual_l2: float
    inner_iterations: int
    converged: bool


def primal_from_dual(y, z):
    """Primal candidate max(0, u_i + v_j + z_ij) for a dual point y = (u, v)."""
    u, v = (y.u, y.v) if isinstance(y, DualVector) else y
    n, m = z.shape
    if u.shape != (n,) or v.shape != (m,):
        raise ValueError(
            f"dual of shape ({u.shape}, {v.shape}) does not match point shape {z.shape}"
        )
    return np.maximum(z + u[:, None] + v[None, :], 0.0)


def dual_value(y, z, a, b):
    """Dual objective 0.5 ||max(0, A*y + Z)||_F^2 - <r, y>."""
    u, v = (y.u, y.v) if isinstance(y, DualVector) else y
    p = primal_from_dual((u, v), z)
    return 0.5 * float(np.vdot(p, p)) - float(a @ u + b @ v)


def dual_gradient(y, z, a, b):
    """Gradient of the dual objective: A max(0, A*y + Z) - r."""
    u, v = (y.u, y.v) if isinstance(y, DualVector) else y
    p = primal_from_dual((u, v), z)
    return np.concatenate([p.sum(axis=1) - a, p.sum(axis=0) - b])


class _DualProblem:
    """Workspace for repeated fused evaluations of the projection dual."""

    def __init__(self, z, a, b):
        self.z = np.ascontiguousarray(z, dtype=np.float64)
        self.a = a
        self.b = b
        n, m = z.shape
        self.n = n
        self.m = m
        self._rows = np.empty(n)
        self._cols = np.empty(m)

    def eval(self, y):
        """Return (g(y), grad g(y), ||grad||_2) sharing one pass over Z."""
        u = y[: self.n]
        v = y[self.n :]
        half_sq = dual_eval(u, v, self.z, self._rows, self._cols)
        grad = np.concatenate([self._rows - self.a, self._cols - self.b])
        val = half_sq - float(self.a @ u + self.b @ v)
        return val, grad, float(np.linalg.norm(grad))


def _solve_dual(z, a, b, stop, max_inner):
    """Accelerated gradient descent on the projection dual.

    ``stop(res_norm, y)`` decides termination.  Fixed step 1/(n+m), the
    exact Lipschitz constant of the dual gradient; momentum is reset
    whenever the dual objective increases (function-value restart).
    Returns (y, residual, iterations, converged).
    """
    prob = _DualProblem(z, a, b)
    nm = prob.n + prob.m
    step = 1.0 / nm

    y = np.asarray(stop["warm"], dtype=np.float64).copy()
    val, grad, res = prob.eval(y)
    accept = stop["accept"]
    if accept(res, y):
        return y, res, 0, True

    y_prev = y.copy()
    val_prev = val
    w = y.copy()
    t = 1.0
    restarted = False
    best_y, best_res = y.copy(), res
    for it in range(1, max_inner + 1):
        _, grad_w, _ = prob.eval(w)
        y = w - step * grad_w
        val, grad, res = prob.eval(y)
        if res < best_res:
            best_y, best_res = y.copy(), res
        if accept(res, y):
            return y, res, it, True
        if val > val_prev and not restarted:
            # restart: drop the momentum and redo a plain step from y_prev;
            # that step cannot increase the objective, so accept its result
            # unconditionally to avoid stalling on rounding noise
            w = y_prev.copy()
            t = 1.0
            restarted = True
            continue
        restarted = False
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        w = y + ((t - 1.0) / t_next) * (y - y_prev)
        y_prev = y
        val_prev = val
        t = t_next
    return best_y, best_res, max_inner, False


def solve_projection_inexact(z, a, b, eps_k, y_warm=None, max_inner=100000):
    """Approximately project Z onto U(a, b) under the verifiable condition.

    The returned pair (coupling, y) satisfies

        ||A coupling - r||_2 <= eps_k / (1 + ||y||_2)

    when ``converged`` is True.  ``eps_k <= 1e-14`` is treated as "solve to
    residual <= 1e-14".  ``y_warm`` defaults to zero; warm starting with the
    previous outer iteration's dual cuts inner iterations drastically and
    does not affect correctness since the condition is re-verified.

    Parameters
    ----------
    z : array (n, m)
        Point to project (for projected gradient: current iterate minus the
        scaled objective gradient).
    a, b : arrays
        Target marginals.
    eps_k : float >= 0
        Tolerance of the inexact condition.
    """
    z = np.asarray(z, dtype=np.float64)
    if eps_k < 0:
        raise ValueError("eps_k must be nonnegative")
    if not np.isfinite(z).all():
        raise ValueError("projection point has non-finite entries")
    n, m = z.shape
    if y_warm is None:
        warm = np.zeros(n + m)
    else:
        warm = y_warm.vector if isinstance(y_warm, DualVector) else np.asarray(y_warm)

    if eps_k <= EXACT_EPS:
        accept = lambda res, y: res <= EXACT_EPS
    else:
        accept = lambda res, y: res * (1.0 + np.linalg.norm(y)) <= eps_k

    y, res, iters, ok = _solve_dual(z, a, b, {"warm": warm, "accept": accept}, max_inner)
    dual = DualVector(u=y[:n].copy(), v=y[n:].copy())
    coupling = primal_from_dual(dual, z)
    return ProjectionResult(
        coupling=coupling,
        dual=dual,
        residual_l2=res,
        inner_iterations=iters,
        converged=ok,
    )


def solve_projection_exact(z, a, b, tol=1e-12, max_inner=1000000):
    """Projection oracle: drive the dual gradient norm below ``tol``.

    The primal candidate is then repaired with ``round_to_polytope`` so the
    returned coupling is exactly feasible; downstream tests may assert
    feasibility rather than near-feasibility.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = np.asarray(z, dtype=np.float64)
    n, m = z.shape
    accept = lambda res, y: res <= tol
    y, res, iters, ok = _solve_dual(
        z, a, b, {"warm": np.zeros(n + m), "accept": accept}, max_inner
    )
    dual = DualVector(u=y[:n].copy(), v=y[n:].copy())
    coupling = round_to_polytope(primal_from_dual(dual, z), a, b)
    return ProjectionResult(
        coupling=coupling,
        dual=dual,
        residual_l2=marginal_residual(coupling, a, b),
        inner_iterations=iters,
        converged=ok,
    )


def round_to_polytope(pi, a, b, mass_tol=1e-10):
    """Repair a nonnegative matrix into an exactly feasible coupling.

    Scales each row i by min(1, a_i / row_i), then each column j by
    min(1, b_j / col_j) (zero sums are left untouched), and distributes the
    remaining deficit as the rank-one correction err_a err_b^T / ||err_a||_1.
    The l1 perturbation obeys

        ||pi - out||_1 <= 2 (||a - pi 1||_1 + ||b - pi^T 1||_1).
    """
    pi = np.asarray(pi, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if (pi < 0).any():
        raise ValueError("rounding requires a nonnegative matrix")
    if abs(a.sum() - b.sum()) > mass_tol:
        raise ValueError(
            f"total masses differ: sum(a)={a.sum()!r} vs sum(b)={b.sum()!r}"
        )

    rows = pi.sum(axis=1)
    rscale = np.ones_like(rows)
    over = rows > a
    rscale[over] = a[over] / rows[over]
    out = pi * rscale[:, None]
    cols = out.sum(axis=0)
    cscale = np.ones_like(cols)
    over = cols > b
    cscale[over] = b[over] / cols[over]
    out *= cscale[None, :]

    # deficits are nonnegative up to rounding; clamp so the correction
    # cannot introduce negative entries
    err_a = np.maximum(a - out.sum(axis=1), 0.0)
    err_b = np.maximum(b - out.sum(axis=0), 0.0)
    total = err_a.sum()
    if total > 0.0:
        out += np.outer(err_a, err_b) / total
    return out
