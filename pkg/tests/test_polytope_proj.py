import numpy as np
import pytest

from gwot.gw_core import apply_A, marginal_residual
from gwot.polytope_proj import (
    DualVector,
    dual_gradient,
    dual_value,
    primal_from_dual,
    round_to_polytope,
    solve_projection_exact,
    solve_projection_inexact,
)


def uniform_pair(n):
    a = np.full(n, 1.0 / n)
    return a, a.copy()


def project_2x2_closed_form(z, a):
    """One-parameter closed form for U((.5,.5),(.5,.5)): plan [[t,.5-t],[.5-t,t]]."""
    t = (z[0, 0] + z[1, 1] - z[0, 1] - z[1, 0] + 1.0) / 4.0
    t = min(0.5, max(0.0, t))
    return np.array([[t, 0.5 - t], [0.5 - t, t]])


class TestPrimalFromDual:
    def test_zero_dual_nonneg_point(self):
        z = np.array([[0.1, 0.2], [0.0, 0.3]])
        y = DualVector(u=np.zeros(2), v=np.zeros(2))
        np.testing.assert_array_equal(primal_from_dual(y, z), z)

    def test_exact_cancellation(self):
        u = np.array([1.0, -2.0])
        v = np.array([0.5, 3.0])
        z = -(u[:, None] + v[None, :])
        out = primal_from_dual(DualVector(u=u, v=v), z)
        np.testing.assert_array_equal(out, np.zeros((2, 2)))

    def test_hand_example(self):
        y = DualVector(u=np.array([1.0, -1.0]), v=np.zeros(2))
        z = np.array([[-0.5, -0.5], [0.5, 0.5]])
        np.testing.assert_array_equal(
            primal_from_dual(y, z), [[0.5, 0.5], [0.0, 0.0]]
        )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            primal_from_dual(DualVector(u=np.zeros(3), v=np.zeros(2)), np.zeros((2, 2)))


class TestDualValueAndGradient:
    def test_zero_everything(self):
        a, b = uniform_pair(2)
        y = DualVector(u=np.zeros(2), v=np.zeros(2))
        assert dual_value(y, np.zeros((2, 2)), a, b) == 0.0

    def test_value_at_outer_product(self):
        a, b = uniform_pair(3)
        z = np.outer(a, b)
        y = DualVector(u=np.zeros(3), v=np.zeros(3))
        assert dual_value(y, z, a, b) == pytest.approx(0.5 * np.vdot(z, z), rel=1e-14)

    def test_gradient_zero_at_feasible_point(self):
        a, b = uniform_pair(3)
        z = np.outer(a, b)
        y = DualVector(u=np.zeros(3), v=np.zeros(3))
        np.testing.assert_allclose(dual_gradient(y, z, a, b), np.zeros(6), atol=1e-15)

    def test_gradient_at_all_clipped_point(self):
        a, b = uniform_pair(2)
        y = DualVector(u=np.zeros(2), v=np.zeros(2))
        z = -np.ones((2, 2))
        np.testing.assert_array_equal(
            dual_gradient(y, z, a, b), -np.concatenate([a, b])
        )

    def test_gradient_finite_differences(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            n, m = rng.integers(2, 6, size=2)
            z = rng.standard_normal((n, m))
            a = rng.random(n) + 0.1
            a /= a.sum()
            b = rng.random(m) + 0.1
            b /= b.sum()
            y = rng.standard_normal(n + m) * 0.3
            grad = dual_gradient((y[:n], y[n:]), z, a, b)
            d = rng.standard_normal(n + m)
            h = 1e-6
            up = dual_value(((y + h * d)[:n], (y + h * d)[n:]), z, a, b)
            dn = dual_value(((y - h * d)[:n], (y - h * d)[n:]), z, a, b)
            fd = (up - dn) / (2 * h)
            directional = float(grad @ d)
            assert abs(fd - directional) <= 1e-6 * (1 + abs(directional))

    def test_value_decreases_along_negative_gradient(self):
        rng = np.random.default_rng(13)
        n, m = 4, 5
        z = rng.standard_normal((n, m))
        a = rng.random(n) + 0.1
        a /= a.sum()
        b = rng.random(m) + 0.1
        b /= b.sum()
        y = rng.standard_normal(n + m) * 0.1
        grad = dual_gradient((y[:n], y[n:]), z, a, b)
        base = dual_value((y[:n], y[n:]), z, a, b)
        step = 1e-4 / (n + m)
        y2 = y - step * grad
        assert dual_value((y2[:n], y2[n:]), z, a, b) < base

    def test_gradient_lipschitz_bound(self):
        rng = np.random.default_rng(14)
        n, m = 5, 4
        z = rng.standard_normal((n, m))
        a = rng.random(n) + 0.1
        a /= a.sum()
        b = rng.random(m) + 0.1
        b /= b.sum()
        for _ in range(25):
            y1 = rng.standard_normal(n + m)
            y2 = rng.standard_normal(n + m)
            g1 = dual_gradient((y1[:n], y1[n:]), z, a, b)
            g2 = dual_gradient((y2[:n], y2[n:]), z, a, b)
            assert np.linalg.norm(g1 - g2) <= (n + m) * np.linalg.norm(y1 - y2) * (
                1 + 1e-12
            )


class TestInexactSolve:
    def test_feasible_point_converges_immediately(self):
        a, b = uniform_pair(3)
        z = np.outer(a, b)
        res = solve_projection_inexact(z, a, b, 1e-3)
        assert res.converged and res.inner_iterations == 0
        assert res.residual_l2 <= 1e-12
        np.testing.assert_array_equal(res.dual.vector, np.zeros(6))

    def test_matches_closed_form_2x2(self):
        a, b = uniform_pair(2)
        z = np.array([[1.0, 0.0], [0.0, 1.0]])
        res = solve_projection_inexact(z, a, b, 1e-10)
        assert res.converged
        np.testing.assert_allclose(res.coupling, np.diag([0.5, 0.5]), atol=1e-8)

    def test_condition_reverifiable_from_fields(self):
        rng = np.random.default_rng(15)
        for eps in (1e-2, 1e-5, 1e-8):
            n, m = 6, 5
            z = rng.standard_normal((n, m))
            a = rng.random(n) + 0.1
            a /= a.sum()
            b = rng.random(m) + 0.1
            b /= b.sum()
            res = solve_projection_inexact(z, a, b, eps)
            assert res.converged
            assert res.residual_l2 * (1.0 + res.dual.norm) <= eps
            # coupling consistent with the dual it was solved against
            np.testing.assert_array_equal(res.coupling, primal_from_dual(res.dual, z))
            assert res.residual_l2 == pytest.approx(
                np.linalg.norm(apply_A(res.coupling).vector - np.concatenate([a, b])),
                rel=1e-12,
                abs=1e-15,
            )

    def test_eps_zero_means_tight_residual(self):
        a, b = uniform_pair(3)
        rng = np.random.default_rng(16)
        z = rng.standard_normal((3, 3))
        res = solve_projection_inexact(z, a, b, 0.0)
        assert res.converged
        assert res.residual_l2 <= 1e-14

    def test_negative_eps_rejected(self):
        a, b = uniform_pair(2)
        with pytest.raises(ValueError):
            solve_projection_inexact(np.zeros((2, 2)), a, b, -1.0)

    def test_cap_reached_reports_not_converged(self):
        rng = np.random.default_rng(17)
        z = rng.standard_normal((4, 4))
        a, b = uniform_pair(4)
        res = solve_projection_inexact(z, a, b, 1e-12, max_inner=3)
        assert not res.converged
        assert res.inner_iterations == 3


class TestExactSolve:
    def test_singleton_polytope(self):
        res = solve_projection_exact(np.array([[7.3]]), np.ones(1), np.ones(1))
        np.testing.assert_allclose(res.coupling, [[1.0]], atol=1e-12)

    def test_2x2_clamped_closed_form(self):
        a, b = uniform_pair(2)
        z = np.array([[1.0, 0.0], [0.0, 1.0]])
        res = solve_projection_exact(z, a, b, tol=1e-12)
        np.testing.assert_allclose(res.coupling, np.diag([0.5, 0.5]), atol=1e-9)

    def test_2x2_interior_closed_form(self):
        rng = np.random.default_rng(18)
        a, b = uniform_pair(2)
        for _ in range(10):
            z = rng.standard_normal((2, 2)) * 0.2
            res = solve_projection_exact(z, a, b, tol=1e-12)
            np.testing.assert_allclose(
                res.coupling, project_2x2_closed_form(z, a), atol=1e-9
            )

    def test_idempotent_on_feasible_input(self):
        rng = np.random.default_rng(19)
        raw = rng.random((4, 5)) + 0.1
        z = raw / raw.sum()
        a = z.sum(axis=1)
        b = z.sum(axis=0)
        res = solve_projection_exact(z, a, b, tol=1e-12)
        np.testing.assert_allclose(res.coupling, z, atol=1e-9)

    def test_exact_output_is_feasible(self):
        rng = np.random.default_rng(20)
        z = rng.standard_normal((5, 4))
        a = rng.random(5) + 0.1
        a /= a.sum()
        b = rng.random(4) + 0.1
        b /= b.sum()
        res = solve_projection_exact(z, a, b, tol=1e-12)
        assert marginal_residual(res.coupling, a, b) <= 1e-13

    def test_variational_inequality(self):
        # <Z - P, Q - P> <= 0 for all feasible Q characterizes the projection P
        rng = np.random.default_rng(21)
        n, m = 5, 4
        z = rng.standard_normal((n, m))
        a = rng.random(n) + 0.1
        a /= a.sum()
        b = rng.random(m) + 0.1
        b /= b.sum()
        proj = solve_projection_exact(z, a, b, tol=1e-12).coupling
        for _ in range(100):
            q = round_to_polytope(rng.random((n, m)), a, b)
            assert float(np.vdot(z - proj, q - proj)) <= 1e-8


class TestRounding:
    def test_feasible_input_unchanged(self):
        rng = np.random.default_rng(22)
        raw = rng.random((4, 4)) + 0.1
        pi = raw / raw.sum()
        a = pi.sum(axis=1)
        b = pi.sum(axis=0)
        np.testing.assert_allclose(round_to_polytope(pi, a, b), pi, atol=1e-15)

    def test_zero_matrix_becomes_outer_product(self):
        a = np.array([0.5, 0.5])
        out = round_to_polytope(np.zeros((2, 2)), a, a)
        np.testing.assert_allclose(out, np.full((2, 2), 0.25), atol=1e-15)

    def test_feasibility_and_l1_bound(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            n = 10
            a = rng.random(n) + 0.1
            a /= a.sum()
            b = rng.random(n) + 0.1
            b /= b.sum()
            pi = rng.random((n, n)) * (2.0 / n**2)
            out = round_to_polytope(pi, a, b)
            assert (out >= 0).all()
            np.testing.assert_allclose(out.sum(axis=1), a, atol=1e-12)
            np.testing.assert_allclose(out.sum(axis=0), b, atol=1e-12)
            lhs = np.abs(pi - out).sum()
            gap = np.abs(a - pi.sum(axis=1)).sum() + np.abs(b - pi.sum(axis=0)).sum()
            assert lhs <= 2.0 * gap * (1 + 1e-12) + 1e-15
            # the coarser residual form of the same bound
            assert lhs <= 2.0 * np.sqrt(2 * n) * marginal_residual(pi, a, b) * (
                1 + 1e-12
            ) + 1e-15

    def test_mass_mismatch_rejected(self):
        with pytest.raises(ValueError):
            round_to_polytope(np.ones((2, 2)), np.array([0.6, 0.6]), np.array([0.5, 0.5]))

    def test_negative_input_rejected(self):
        a = np.array([0.5, 0.5])
        with pytest.raises(ValueError):
            round_to_polytope(np.array([[-0.1, 0.2], [0.3, 0.4]]), a, a)


class TestProjectionErrorBound:
    def test_inexact_error_tracks_residual(self):
        # empirical form of the Hoffman-type bound: the distance to the exact
        # projection shrinks monotonically with eps and stays proportional to
        # the feasibility residual across the sweep
        rng = np.random.default_rng(24)
        n = 20
        z = rng.standard_normal((n, n))
        a = rng.random(n) + 0.2
        a /= a.sum()
        b = rng.random(n) + 0.2
        b /= b.sum()
        exact = solve_projection_exact(z, a, b, tol=1e-12).coupling
        eps_grid = [1e-2, 1e-4, 1e-6, 1e-8]
        dists = []
        ratios = []
        for eps in eps_grid:
            res = solve_projection_inexact(z, a, b, eps)
            assert res.converged
            dist = float(np.linalg.norm(res.coupling - exact))
            dists.append(dist)
            if res.residual_l2 > 0:
                ratios.append(dist / res.residual_l2)
        assert all(d2 <= d1 for d1, d2 in zip(dists, dists[1:]))
        assert max(ratios) <= 10.0 * min(ratios)
