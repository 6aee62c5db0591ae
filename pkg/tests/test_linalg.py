"""Tests for the complex linear-algebra kernels against independent oracles."""

import numpy as np
import pytest

from rislearn.linalg import (EigDecomposition, IllConditionedError, hermitian_deviation,
                             hermitian_eig, solve_linear)


def random_hermitian(n, rng, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def charpoly_roots(a):
    """Eigenvalues via Newton-identity characteristic polynomial + companion roots.

    Independent of the LAPACK path: power sums from explicit matrix powers,
    elementary symmetric polynomials via Newton's identities, roots from the
    companion matrix with a few Newton refinements on the quartic.
    """
    n = a.shape[0]
    powers = [np.eye(n, dtype=complex)]
    for _ in range(n):
        powers.append(powers[-1] @ a)
    p = [np.trace(powers[j]).real for j in range(n + 1)]
    e = [1.0]
    for m in range(1, n + 1):
        acc = 0.0
        for j in range(1, m + 1):
            acc += (-1) ** (j - 1) * e[m - j] * p[j]
        e.append(acc / m)
    # coefficients of lambda^n - e1 lambda^(n-1) + e2 ... in np.roots order
    coeffs = [(-1) ** j * e[j] for j in range(n + 1)]
    roots = np.roots(coeffs)
    poly = np.polynomial.Polynomial(list(reversed(coeffs)))
    dpoly = poly.deriv()
    for _ in range(50):
        roots = roots - poly(roots) / dpoly(roots)
    assert np.max(np.abs(roots.imag)) < 1e-8
    return np.sort(roots.real)


def cofactor_det(a):
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    total = 0.0 + 0.0j
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += (-1) ** j * a[0, j] * cofactor_det(minor)
    return total


def adjugate_solve(a, b):
    """x = adj(A) b / det(A) by cofactor expansion; only sane for n <= 5."""
    n = a.shape[0]
    det = cofactor_det(a)
    adj = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(a, i, axis=0), j, axis=1)
            adj[j, i] = (-1) ** (i + j) * cofactor_det(minor)
    return adj @ b / det


class TestHermitianEig:
    def test_identity(self):
        eig = hermitian_eig(np.eye(3, dtype=complex))
        np.testing.assert_allclose(eig.eigenvalues, np.ones(3))
        q = eig.eigenvectors
        np.testing.assert_allclose(q.conj().T @ q, np.eye(3), atol=1e-12)

    def test_diagonal(self):
        eig = hermitian_eig(np.diag([-2.0, 0.0, 5.0]).astype(complex))
        np.testing.assert_allclose(eig.eigenvalues, [-2.0, 0.0, 5.0], atol=1e-14)
        # eigenvectors permute the standard basis
        np.testing.assert_allclose(np.abs(eig.eigenvectors), np.eye(3), atol=1e-12)

    def test_matches_charpoly_oracle(self):
        rng = np.random.default_rng(1234)
        a = random_hermitian(4, rng)
        eig = hermitian_eig(a)
        expected = charpoly_roots(a)
        np.testing.assert_allclose(eig.eigenvalues, expected, atol=1e-8)

    def test_reconstruction_and_unitarity(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            a = random_hermitian(6, rng, scale=rng.uniform(0.1, 10))
            eig = hermitian_eig(a)
            resid = np.max(np.abs(eig.reconstruct() - 0.5 * (a + a.conj().T)))
            assert resid < 1e-8 * max(np.max(np.abs(a)), 1e-300)
            q = eig.eigenvectors
            assert np.max(np.abs(q.conj().T @ q - np.eye(6))) < 1e-10
            assert np.all(np.diff(eig.eigenvalues) >= 0)

    def test_eigenvalue_sum_equals_trace(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = random_hermitian(5, rng)
            eig = hermitian_eig(a)
            tr = float(np.trace(a).real)
            assert abs(eig.eigenvalues.sum() - tr) < 1e-8 * abs(tr) + 1e-10

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            hermitian_eig(np.ones((2, 3)))

    def test_rejects_non_hermitian(self):
        a = np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError, match="Hermitian"):
            hermitian_eig(a)

    def test_symmetrizes_roundoff(self):
        rng = np.random.default_rng(3)
        a = random_hermitian(4, rng)
        noisy = a + 1e-12 * rng.normal(size=(4, 4))
        eig = hermitian_eig(noisy)
        assert isinstance(eig, EigDecomposition)

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        a = random_hermitian(5, rng)
        e1 = hermitian_eig(a)
        e2 = hermitian_eig(a.copy())
        assert np.array_equal(e1.eigenvalues, e2.eigenvalues)
        assert np.array_equal(e1.eigenvectors, e2.eigenvectors)


class TestSolveLinear:
    def test_identity(self):
        b = np.array([1 + 2j, -3.0, 0.5j])
        np.testing.assert_array_equal(solve_linear(np.eye(3), b), b)

    def test_scalar_matrix(self):
        x = solve_linear(2.0 * np.eye(4), np.ones(4))
        np.testing.assert_allclose(x, 0.5 * np.ones(4))

    def test_matches_adjugate_oracle(self):
        rng = np.random.default_rng(42)
        a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)) + 3 * np.eye(5)
        b = rng.normal(size=5) + 1j * rng.normal(size=5)
        x = solve_linear(a, b)
        expected = adjugate_solve(a, b)
        np.testing.assert_allclose(x, expected, atol=1e-10)
        assert np.linalg.norm(a @ x - b) < 1e-10 * np.linalg.norm(b)

    def test_residual_over_many_systems(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)) + 4 * np.eye(6)
            b = rng.normal(size=6) + 1j * rng.normal(size=6)
            x = solve_linear(a, b)
            assert np.linalg.norm(a @ x - b) < 1e-8 * np.linalg.norm(b)

    def test_singular_raises_with_condition(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-16]], dtype=complex)
        with pytest.raises(IllConditionedError) as exc:
            solve_linear(a, np.ones(2))
        assert exc.value.cond > 1e12

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(4, 4)) + 2 * np.eye(4)
        b = rng.normal(size=4)
        assert np.array_equal(solve_linear(a, b), solve_linear(a.copy(), b.copy()))


def test_hermitian_deviation():
    assert hermitian_deviation(np.eye(2)) == 0.0
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert hermitian_deviation(a) == 1.0
