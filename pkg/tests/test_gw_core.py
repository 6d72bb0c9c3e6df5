import numpy as np
import pytest

from gwot.gw_core import (
    CostMatrix,
    Marginals,
    apply_A,
    apply_A_adjoint,
    gw_energy,
    gw_gradient,
    gw_quadratic,
    lipschitz_bound,
    marginal_residual,
    quadratic_and_gradient,
    spectral_norm,
)


def energy_bruteforce(pi, c1, c2):
    """Quadruple-sum oracle for the squared-loss GW energy (n, m <= 6)."""
    n, m = pi.shape
    total = 0.0
    for i in range(n):
        for ip in range(n):
            for j in range(m):
                for jp in range(m):
                    total += (c1[i, ip] - c2[j, jp]) ** 2 * pi[i, j] * pi[ip, jp]
    return total


def quadratic_bruteforce(pi, c1, c2):
    """Quadruple-sum oracle for -<c1 pi c2, pi> (note the c2[jp, j] order)."""
    n, m = pi.shape
    total = 0.0
    for i in range(n):
        for ip in range(n):
            for j in range(m):
                for jp in range(m):
                    total += c1[i, ip] * c2[jp, j] * pi[i, j] * pi[ip, jp]
    return -total


def random_feasible(rng, n, m):
    """Coupling plus the marginals it is exactly feasible for."""
    raw = rng.random((n, m)) + 0.05
    pi = raw / raw.sum()
    return pi, pi.sum(axis=1), pi.sum(axis=0)


class TestApplyA:
    def test_outer_product_hits_marginals(self):
        rng = np.random.default_rng(1)
        a = rng.random(4) + 0.1
        a /= a.sum()
        b = rng.random(3) + 0.1
        b /= b.sum()
        img = apply_A(np.outer(a, b))
        np.testing.assert_allclose(img.row_sums, a, atol=1e-15)
        np.testing.assert_allclose(img.col_sums, b, atol=1e-15)
        assert marginal_residual(np.outer(a, b), a, b) < 1e-14

    def test_zero_matrix(self):
        img = apply_A(np.zeros((2, 2)))
        np.testing.assert_array_equal(img.vector, np.zeros(4))

    def test_hand_example(self):
        img = apply_A(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(img.row_sums, [3.0, 7.0])
        np.testing.assert_array_equal(img.col_sums, [4.0, 6.0])

    def test_adjoint_zero(self):
        np.testing.assert_array_equal(
            apply_A_adjoint(np.zeros(5), (2, 3)), np.zeros((2, 3))
        )

    def test_adjoint_hand_example(self):
        out = apply_A_adjoint(np.array([1.0, 0.0, 0.0, 2.0]), (2, 2))
        np.testing.assert_array_equal(out, [[1.0, 3.0], [0.0, 2.0]])

    def test_adjoint_dimension_mismatch(self):
        with pytest.raises(ValueError):
            apply_A_adjoint(np.zeros(4), (2, 3))

    def test_adjoint_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n, m = rng.integers(2, 7, size=2)
            pi = rng.standard_normal((n, m))
            y = rng.standard_normal(n + m)
            lhs = float(apply_A(pi).vector @ y)
            rhs = float(np.vdot(pi, apply_A_adjoint(y, (n, m))))
            assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


class TestQuadraticAndEnergy:
    def test_zero_cost(self):
        rng = np.random.default_rng(2)
        pi = rng.random((3, 4))
        assert gw_quadratic(pi, np.zeros((3, 3)), np.zeros((4, 4))) == 0.0
        a = np.full(3, 1 / 3)
        b = np.full(4, 0.25)
        assert gw_energy(pi, np.zeros((3, 3)), np.zeros((4, 4)), a, b) == 0.0

    def test_hand_2x2(self):
        c = np.array([[0.0, 1.0], [1.0, 0.0]])
        pi = np.diag([0.5, 0.5])
        assert gw_quadratic(pi, c, c) == pytest.approx(-0.5, abs=1e-15)
        a = np.array([0.5, 0.5])
        # constants 0.5 + 0.5, quadratic -0.5: perfect isometric match
        assert gw_energy(pi, c, c, a, a) == pytest.approx(0.0, abs=1e-15)

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n, m = rng.integers(2, 7, size=2)
            c1 = rng.random((n, n))
            c2 = rng.random((m, m))
            pi, a, b = random_feasible(rng, n, m)
            got = gw_quadratic(pi, c1, c2)
            want = quadratic_bruteforce(pi, c1, c2)
            assert abs(got - want) <= 1e-10 * (1 + abs(want))
            # the energy split against the Eq.-style quadruple sum needs
            # symmetric dissimilarity matrices
            c1s = c1 + c1.T
            c2s = c2 + c2.T
            got_e = gw_energy(pi, c1s, c2s, a, b)
            want_e = energy_bruteforce(pi, c1s, c2s)
            assert abs(got_e - want_e) <= 1e-10 * (1 + abs(want_e))

    def test_product_coupling_identical_graphs(self):
        rng = np.random.default_rng(4)
        c = rng.random((4, 4))
        c = c + c.T
        pi, a, b = random_feasible(rng, 4, 4)
        pi = np.outer(a, b)
        got = gw_energy(pi, c, c, a, b)
        assert got == pytest.approx(energy_bruteforce(pi, c, c), rel=1e-10)

    def test_energy_minus_quadratic_constant_in_pi(self):
        rng = np.random.default_rng(5)
        c1 = rng.random((3, 3))
        c2 = rng.random((4, 4))
        a = np.full(3, 1 / 3)
        b = np.full(4, 0.25)
        diffs = set()
        for _ in range(5):
            pi = rng.random((3, 4))
            diffs.add(round(gw_energy(pi, c1, c2, a, b) - 2 * gw_quadratic(pi, c1, c2), 12))
        assert len(diffs) == 1

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gw_quadratic(np.zeros((2, 3)), np.zeros((3, 3)), np.zeros((3, 3)))


class TestGradient:
    def test_zero_coupling(self):
        c = np.ones((3, 3))
        np.testing.assert_array_equal(gw_gradient(np.zeros((3, 3)), c, c), np.zeros((3, 3)))

    def test_symmetric_identity(self):
        rng = np.random.default_rng(6)
        c1 = rng.random((3, 3))
        c1 = c1 + c1.T
        c2 = rng.random((4, 4))
        c2 = c2 + c2.T
        pi = rng.random((3, 4))
        np.testing.assert_allclose(
            gw_gradient(pi, c1, c2), -2.0 * c1 @ pi @ c2, atol=1e-12
        )

    def test_finite_differences(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n, m = rng.integers(2, 6, size=2)
            c1 = rng.random((n, n))
            c2 = rng.random((m, m))
            pi = rng.random((n, m))
            grad = gw_gradient(pi, c1, c2)
            d = rng.standard_normal((n, m))
            h = 1e-6
            fd = (gw_quadratic(pi + h * d, c1, c2) - gw_quadratic(pi - h * d, c1, c2)) / (
                2 * h
            )
            directional = float(np.vdot(grad, d))
            assert abs(fd - directional) <= 1e-6 * (1 + abs(directional))

    def test_quadratic_and_gradient_consistent(self):
        rng = np.random.default_rng(9)
        c1 = rng.random((4, 4))
        c2 = rng.random((5, 5))
        pi = rng.random((4, 5))
        f, g = quadratic_and_gradient(pi, c1, c2)
        assert f == pytest.approx(gw_quadratic(pi, c1, c2), rel=1e-14)
        np.testing.assert_allclose(g, gw_gradient(pi, c1, c2), atol=1e-13)

    def test_smoothness_witness(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            n, m = rng.integers(2, 8, size=2)
            c1 = rng.random((n, n))
            c2 = rng.random((m, m))
            lip = lipschitz_bound(c1, c2)
            p1 = rng.random((n, m))
            p2 = rng.random((n, m))
            lhs = np.linalg.norm(gw_gradient(p1, c1, c2) - gw_gradient(p2, c1, c2))
            assert lhs <= lip * np.linalg.norm(p1 - p2) * (1 + 1e-9)


class TestLipschitz:
    def test_identity(self):
        assert lipschitz_bound(np.eye(3), np.eye(3)) == pytest.approx(2.0, rel=1e-9)

    def test_swap_matrix(self):
        c = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert lipschitz_bound(c, c) == pytest.approx(2.0, rel=1e-9)

    def test_against_dense_eigensolver(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            c1 = rng.random((10, 10))
            c1 = c1 + c1.T
            c2 = rng.random((10, 10))
            c2 = c2 + c2.T
            want = 2.0 * np.abs(np.linalg.eigvalsh(c1)).max() * np.abs(
                np.linalg.eigvalsh(c2)
            ).max()
            assert lipschitz_bound(c1, c2) == pytest.approx(want, rel=1e-8)

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((3, 3))) == 0.0

    def test_nonconvergence_warns_and_inflates(self):
        rng = np.random.default_rng(12)
        mat = rng.random((6, 6))
        with pytest.warns(RuntimeWarning):
            val = spectral_norm(mat, tol=0.0, max_iter=2)
        assert val > 0.0


class TestDomainTypes:
    def test_cost_matrix_detects_symmetry(self):
        cm = CostMatrix.from_entries([[0.0, 1.0], [1.0, 0.0]])
        assert cm.symmetric and cm.n == 2

    def test_cost_matrix_rejects_bad_input(self):
        with pytest.raises(ValueError):
            CostMatrix.from_entries(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            CostMatrix.from_entries([[0.0, -1.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            CostMatrix.from_entries([[np.inf, 0.0], [0.0, 0.0]])

    def test_marginals_validation(self):
        Marginals.from_weights([0.5, 0.5])
        with pytest.raises(ValueError):
            Marginals.from_weights([0.5, 0.6])
        with pytest.raises(ValueError):
            Marginals.from_weights([1.5, -0.5])
        uni = Marginals.uniform(4)
        assert uni.weights.sum() == pytest.approx(1.0, abs=1e-12)
