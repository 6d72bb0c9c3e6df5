"""Core objects for squared-loss Gromov-Wasserstein optimal transport.

The problem data are two intra-domain dissimilarity matrices ``c1`` (n x n)
and ``c2`` (m x m) together with marginal weight vectors ``a`` (length n) and
``b`` (length m).  A coupling is any nonnegative n x m matrix; feasibility
(row sums ``a``, column sums ``b``) is *not* assumed, since the projected
gradient iterates handled downstream are allowed to be slightly infeasible.

Everything here operates on dense float64 arrays.  All functions are pure.
"""

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CostMatrix",
    "Marginals",
    "ConstraintImage",
    "check_coupling",
    "apply_A",
    "apply_A_adjoint",
    "marginal_residual",
    "gw_quadratic",
    "gw_gradient",
    "gw_energy",
    "gw_constant",
    "quadratic_and_gradient",
    "spectral_norm",
    "lipschitz_bound",
]

MARGINAL_SUM_TOL = 1e-12


@dataclass(frozen=True)
class CostMatrix:
    """Square nonnegative dissimilarity matrix with a cached symmetry flag."""

    entries: np.ndarray
    symmetric: bool

    @classmethod
    def from_entries(cls, entries):
        entries = np.ascontiguousarray(entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"cost matrix must be square, got shape {entries.shape}")
        if not np.isfinite(entries).all():
            raise ValueError("cost matrix has non-finite entries")
        if (entries < 0).any():
            raise ValueError("cost matrix has negative entries")
        symmetric = bool(np.array_equal(entries, entries.T))
        return cls(entries=entries, symmetric=symmetric)

    @property
    def n(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class Marginals:
    """Probability weights on a simplex (sum to 1 within 1e-12).

    Inputs violating the sum constraint are rejected rather than renormalized;
    silent renormalization would mask upstream data bugs.
    """

    weights: np.ndarray

    @classmethod
    def from_weights(cls, weights):
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if weights.ndim != 1:
            raise ValueError("marginals must be a 1-d vector")
        if (weights < 0).any():
            raise ValueError("marginals have negative entries")
        total = weights.sum()
        if abs(total - 1.0) > MARGINAL_SUM_TOL:
            raise ValueError(f"marginal weights sum to {total!r}, not 1")
        return cls(weights=weights)

    @classmethod
    def uniform(cls, n):
        return cls(weights=np.full(n, 1.0 / n))

    @property
    def n(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class ConstraintImage:
    """Row and column sums of a coupling, i.e. its image under ``apply_A``."""

    row_sums: np.ndarray
    col_sums: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.row_sums, self.col_sums])


def check_coupling(pi):
    """Validate a coupling candidate: dense 2-d, finite, nonnegative entries."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 2:
        raise ValueError("coupling must be a 2-d matrix")
    if not np.isfinite(pi).all():
        raise ValueError("coupling has non-finite entries")
    if (pi < 0).any():
        raise ValueError("coupling has negative entries")
    return pi


def apply_A(pi):
    """Marginal map of a coupling: (row sums, column sums).

    This is the linear operator whose kernel describes mass-balance
    directions; its residual against the target marginals is the feasibility
    measure used by the inexact projection stopping rule.
    """
    pi = np.asarray(pi, dtype=np.float64)
    return ConstraintImage(row_sums=pi.sum(axis=1), col_sums=pi.sum(axis=0))


def apply_A_adjoint(y, shape):
    """Adjoint of the marginal map: (u, v) -> matrix with entries u_i + v_j.

    Parameters
    ----------
    y : array, length n + m
        Concatenated row/column multipliers.
    shape : tuple (n, m)
        Target coupling shape.
    """
    n, m = shape
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n + m,):
        raise ValueError(f"dual vector has length {y.shape}, expected {n + m}")
    return y[:n, None] + y[None, n:]


def marginal_residual(pi, a, b):
    """l2 norm of the concatenated marginal violation ||A pi - r||_2."""
    pi = np.asarray(pi, dtype=np.float64)
    dr = pi.sum(axis=1) - a
    dc = pi.sum(axis=0) - b
    return float(np.sqrt(dr @ dr + dc @ dc))


def _check_dims(pi, c1, c2):
    if c1.ndim != 2 or c1.shape[0] != c1.shape[1]:
        raise ValueError(f"c1 must be square, got {c1.shape}")
    if c2.ndim != 2 or c2.shape[0] != c2.shape[1]:
        raise ValueError(f"c2 must be square, got {c2.shape}")
    if pi.shape != (c1.shape[0], c2.shape[0]):
        raise ValueError(
            f"coupling shape {pi.shape} does not conform to costs {c1.shape[0]}x{c2.shape[0]}"
        )


def gw_quadratic(pi, c1, c2):
    """Quadratic part of the squared-loss GW objective: -<c1 pi c2, pi>.

    Evaluated with two matrix products and one inner product; never the
    quadruple sum.
    """
    pi = np.asarray(pi, dtype=np.float64)
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    _check_dims(pi, c1, c2)
    return -float(np.vdot(c1 @ pi @ c2, pi))


def gw_gradient(pi, c1, c2, symmetric=None):
    """Gradient of ``gw_quadratic`` with respect to the coupling.

    For general cost matrices this is -(c1 pi c2 + c1^T pi c2^T), the
    derivative of the bilinear form (both terms transpose together); when
    both matrices are symmetric it reduces to -2 c1 pi c2, computed with
    half the work.

    Parameters
    ----------
    symmetric : bool or None
        Whether both cost matrices are symmetric.  None triggers a test.
    """
    pi = np.asarray(pi, dtype=np.float64)
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    _check_dims(pi, c1, c2)
    if symmetric is None:
        symmetric = np.array_equal(c1, c1.T) and np.array_equal(c2, c2.T)
    if symmetric:
        return -2.0 * (c1 @ pi @ c2)
    return -(c1 @ pi @ c2 + c1.T @ pi @ c2.T)


def quadratic_and_gradient(pi, c1, c2, symmetric=None):
    """Value and gradient of ``gw_quadratic`` sharing the inner product.

    In the symmetric case both come from the single product c1 pi c2, which
    is the dominant cost of every outer solver iteration.
    """
    pi = np.asarray(pi, dtype=np.float64)
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    _check_dims(pi, c1, c2)
    if symmetric is None:
        symmetric = np.array_equal(c1, c1.T) and np.array_equal(c2, c2.T)
    if symmetric:
        mixed = c1 @ pi @ c2
        return -float(np.vdot(mixed, pi)), -2.0 * mixed
    return gw_quadratic(pi, c1, c2), gw_gradient(pi, c1, c2, symmetric=False)


def gw_constant(c1, c2, a, b):
    """Coupling-independent part of the GW energy for fixed marginals."""
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(a @ (c1 * c1) @ a + b @ (c2 * c2) @ b)


def gw_energy(pi, c1, c2, a, b):
    """Squared-loss GW energy: constants plus twice the quadratic part.

    Coincides with the quadruple sum sum_{ii'jj'} (c1_{ii'} - c2_{jj'})^2
    pi_{ij} pi_{i'j'} whenever ``pi`` is feasible for (a, b); for infeasible
    couplings the constants are still taken from the target marginals.
    """
    return gw_constant(c1, c2, a, b) + 2.0 * gw_quadratic(pi, c1, c2)


def spectral_norm(mat, tol=1e-10, max_iter=5000):
    """Largest singular value via power iteration on M^T M.

    Deterministic start vector (all ones plus a small index-dependent
    perturbation).  If the iteration does not converge within ``max_iter``,
    the best Rayleigh estimate inflated by 1% is returned and a warning is
    emitted.
    """
    mat = np.asarray(mat, dtype=np.float64)
    n = mat.shape[1]
    x = 1.0 + 1e-6 * np.arange(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = mat.T @ (mat @ x)
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0:
            return 0.0
        lam_new = float(x @ y)
        x = y / norm_y
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return float(np.sqrt(max(lam_new, 0.0)))
        lam = lam_new
    warnings.warn(
        f"power iteration did not reach tolerance {tol} in {max_iter} iterations; "
        "returning the Rayleigh estimate inflated by 1%",
        RuntimeWarning,
    )
    return float(np.sqrt(max(lam, 0.0))) * 1.01


def lipschitz_bound(c1, c2, tol=1e-10, max_iter=5000):
    """Smoothness constant of the GW quadratic: 2 ||c1||_2 ||c2||_2."""
    return 2.0 * spectral_norm(c1, tol=tol, max_iter=max_iter) * spectral_norm(
        c2, tol=tol, max_iter=max_iter
    )
