import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdtomo import linalg
from pdtomo.errors import EmptyMatrix, IllConditioned, NonSquare


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


class TestInvert:
    def test_identity(self):
        np.testing.assert_array_equal(linalg.invert(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(linalg.invert(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), atol=1e-15)

    def test_two_by_two(self):
        M = np.array([[1.0, 2.0], [3.0, 4.0]])
        inv = linalg.invert(M)
        np.testing.assert_allclose(inv, [[-2.0, 1.0], [1.5, -0.5]], atol=1e-14)
        np.testing.assert_allclose(inv @ M, np.eye(2), atol=1e-14)

    def test_guard(self):
        with pytest.raises(IllConditioned) as info:
            linalg.invert(np.array([[1.0, 0.0], [0.0, 1e-10]]))
        assert info.value.kappa == pytest.approx(1e10)
        assert linalg.invert(np.array([[1.0, 0.0], [0.0, 1e-10]]), kappa_max=1e11)[1, 1] == pytest.approx(1e10)

    def test_singular_and_nonsquare(self):
        with pytest.raises(IllConditioned):
            linalg.invert(np.ones((3, 3)))
        with pytest.raises(NonSquare):
            linalg.invert(np.ones((2, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            linalg.invert(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_residual_bound(self):
        rng = np.random.default_rng(3)
        for n in (2, 5, 16, 40):
            M = rng.standard_normal((n, n))
            residual = np.max(np.abs(linalg.invert(M) @ M - np.eye(n)))
            assert residual <= 1e-10 * linalg.condition_number(M)

    def test_double_inverse(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            M = rng.standard_normal((6, 6))
            if linalg.condition_number(M) < 1e4:
                np.testing.assert_allclose(linalg.invert(linalg.invert(M)), M, atol=1e-8)

    def test_complex(self):
        M = np.array([[1.0, 1j], [0.0, 2.0]])
        np.testing.assert_allclose(linalg.invert(M) @ M, np.eye(2), atol=1e-15)


class TestRank:
    def test_outer_product(self):
        rng = np.random.default_rng(0)
        u, v = rng.standard_normal(6), rng.standard_normal(6)
        assert linalg.numerical_rank(np.outer(u, v)).numerical_rank == 1

    def test_identity(self):
        report = linalg.numerical_rank(np.eye(4))
        assert report.numerical_rank == 4
        assert report.tolerance_used == linalg.RANK_TOL

    def test_sum_of_outer_products(self):
        rng = np.random.default_rng(1)
        M = sum(np.outer(rng.standard_normal(8), rng.standard_normal(8)) for _ in range(3))
        report = linalg.numerical_rank(M)
        assert report.numerical_rank == 3
        assert np.all(np.diff(report.singular_values) <= 0)
        assert report.singular_values[3] < 1e-10 * report.singular_values[0]

    def test_errors(self):
        with pytest.raises(EmptyMatrix):
            linalg.numerical_rank(np.zeros((0, 3)))
        for tol in (0.0, 1.0, -1e-3):
            with pytest.raises(ValueError):
                linalg.numerical_rank(np.eye(2), tol)

    def test_zero_matrix(self):
        assert linalg.numerical_rank(np.zeros((3, 3))).numerical_rank == 0

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 6))
    def test_invariant_under_orthogonal_maps_and_permutations(self, seed, k):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((8, k)) @ rng.standard_normal((k, 8))
        Q1, Q2 = _orthogonal(rng, 8), _orthogonal(rng, 8)
        expected = linalg.numerical_rank(M).numerical_rank
        assert expected == k
        assert linalg.numerical_rank(Q1 @ M @ Q2).numerical_rank == expected
        assert linalg.numerical_rank(M[rng.permutation(8)][:, rng.permutation(8)]).numerical_rank == expected


class TestDeterminant:
    def test_examples(self):
        assert linalg.determinant(np.eye(5)) == pytest.approx(1.0)
        assert linalg.determinant(np.diag([1.0, 2.0, 3.0])) == pytest.approx(6.0)
        assert linalg.determinant(np.array([[1.0, 2.0], [3.0, 4.0]])) == pytest.approx(-2.0)
        assert linalg.determinant(np.zeros((0, 0))) == 1.0
        with pytest.raises(NonSquare):
            linalg.determinant(np.ones((2, 3)))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 7))
    def test_multiplicative(self, seed, n):
        rng = np.random.default_rng(seed)
        M1, M2 = rng.standard_normal((n, n)), rng.standard_normal((n, n))
        lhs = linalg.determinant(M1 @ M2)
        rhs = linalg.determinant(M1) * linalg.determinant(M2)
        assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-12)

    def test_matches_eigenvalue_product(self):
        rng = np.random.default_rng(9)
        M = rng.standard_normal((6, 6))
        assert linalg.determinant(M) == pytest.approx(np.prod(np.linalg.eigvals(M)).real, rel=1e-10)


class TestSchur:
    def test_empty_interior(self):
        assert linalg.schur_complements(np.array([[1.0, 2.0], [3.0, 4.0]])) == (1.0, 2.0, 3.0, 4.0)

    def test_identity(self):
        assert linalg.schur_complements(np.eye(3)) == (1.0, 0.0, 0.0, 1.0)

    def test_against_explicit_formula(self):
        rng = np.random.default_rng(42)
        S = rng.standard_normal((4, 4))
        a, beta, b, alpha, M, delta, c, gamma, d = linalg.partition_bordered(S)
        Minv = np.linalg.inv(M)
        expected = (a - beta @ Minv @ alpha, b - beta @ Minv @ delta,
                    c - gamma @ Minv @ alpha, d - gamma @ Minv @ delta)
        np.testing.assert_allclose(linalg.schur_complements(S), expected, rtol=1e-12)

    def test_partition_layout(self):
        S = np.arange(16.0).reshape(4, 4)
        a, beta, b, alpha, M, delta, c, gamma, d = linalg.partition_bordered(S)
        assert (a, b, c, d) == (0.0, 3.0, 12.0, 15.0)
        np.testing.assert_array_equal(beta, [1.0, 2.0])
        np.testing.assert_array_equal(alpha, [4.0, 8.0])
        np.testing.assert_array_equal(delta, [7.0, 11.0])
        np.testing.assert_array_equal(gamma, [13.0, 14.0])
        np.testing.assert_array_equal(M, [[5.0, 6.0], [9.0, 10.0]])

    def test_two_by_two_determinant_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            S = rng.standard_normal((2, 2))
            A, B, C, D = linalg.schur_complements(S)
            assert linalg.determinant(S) == pytest.approx(A * D - B * C, rel=1e-12)

    def test_bordered_determinant_identity(self):
        # det S * det M = A/M * D/M - B/M * C/M times det(M)^2 (Desnanot-Jacobi)
        rng = np.random.default_rng(6)
        S = rng.standard_normal((5, 5))
        A, B, C, D = linalg.schur_complements(S)
        detM = linalg.determinant(S[1:-1, 1:-1])
        assert linalg.determinant(S) * detM == pytest.approx(detM**2 * (A * D - B * C), rel=1e-10)

    def test_ill_conditioned_interior(self):
        with pytest.raises(IllConditioned):
            linalg.schur_complements(np.diag([1.0, 0.0, 1.0]))


def test_block_round_trip():
    M = np.arange(36.0).reshape(6, 6)
    np.testing.assert_array_equal(linalg.assemble_blocks(*linalg.split_blocks(M)), M)
