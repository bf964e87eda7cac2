"""Sparse factorizations, Hessenberg eigenvalues, and the Arnoldi loop."""

from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from resonavis.linalg import (
    KrylovState,
    LinAlgError,
    NotPositiveDefiniteError,
    SingularMatrixError,
    arnoldi,
    factor_complex,
    factor_spd,
    hessenberg_eig,
    solve,
    spmv,
)


def thomas_solve(lower, diag, upper, rhs):
    # classic tridiagonal elimination, an independent oracle for factor_spd
    n = len(diag)
    c = np.zeros(n - 1)
    d = np.zeros(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * c[i - 1]
        if i < n - 1:
            c[i] = upper[i] / denom
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / denom
    x = np.zeros(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def bareiss_determinant(mat):
    # fraction-free elimination: exact for integer matrices
    a = [[Fraction(int(v)) for v in row] for row in mat]
    n = len(a)
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return Fraction(0)
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev
            a[i][k] = Fraction(0)
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def test_spmv_matches_dense():
    rng = np.random.default_rng(0)
    dense = rng.standard_normal((7, 7))
    dense[np.abs(dense) < 0.8] = 0.0
    mat = sp.csr_matrix(dense)
    x = rng.standard_normal(7)
    np.testing.assert_allclose(spmv(mat, x), dense @ x, rtol=1e-14)
    with pytest.raises(ValueError, match="dimension mismatch"):
        spmv(mat, np.ones(5))


def test_factor_spd_against_thomas_oracle():
    n = 40
    diag = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    mat = sp.diags([off, diag, off], offsets=(-1, 0, 1), format="csc")
    rng = np.random.default_rng(3)
    fact = factor_spd(mat)
    for _ in range(5):
        rhs = rng.standard_normal(n)
        expected = thomas_solve(off, diag, off, rhs)
        np.testing.assert_allclose(fact.solve(rhs), expected, rtol=1e-12, atol=1e-12)


def test_factor_spd_rejects_indefinite_and_nonsymmetric():
    indefinite = sp.diags([1.0, -1.0, 1.0]).tocsc()
    with pytest.raises(NotPositiveDefiniteError):
        factor_spd(indefinite)
    nonsym = sp.csc_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    with pytest.raises(NotPositiveDefiniteError, match="not symmetric"):
        factor_spd(nonsym)
    assert issubclass(NotPositiveDefiniteError, LinAlgError)


def test_factor_complex_round_trip():
    rng = np.random.default_rng(11)
    dense = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    dense[np.abs(dense) < 0.9] = 0.0
    dense += 4.0 * np.eye(12)
    mat = sp.csc_matrix(dense)
    fact = factor_complex(mat)
    x = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    b = dense @ x
    got = fact.solve(b)
    assert np.linalg.norm(got - x) <= 1e-9 * np.linalg.norm(x)


def test_factor_complex_singular():
    singular = sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 4.0]], dtype=complex))
    with pytest.raises(SingularMatrixError):
        factor_complex(singular)


def test_real_factorization_accepts_complex_rhs():
    # componentwise path: imaginary parts must not be dropped
    n = 9
    mat = sp.diags(
        [np.full(n - 1, -1.0), np.full(n, 4.0), np.full(n - 1, -1.0)],
        offsets=(-1, 0, 1),
    ).tocsc()
    fact = factor_spd(mat)
    rng = np.random.default_rng(5)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = fact.solve(b)
    assert np.iscomplexobj(x)
    dense = mat.toarray()
    np.testing.assert_allclose(dense @ x, b, rtol=1e-12, atol=1e-12)
    with pytest.raises(ValueError, match="right-hand side"):
        fact.solve(np.ones(n + 1))
    np.testing.assert_array_equal(solve(fact, b), x)


def test_hessenberg_eig_trace_and_determinant():
    rng = np.random.default_rng(17)
    for _ in range(10):
        n = int(rng.integers(3, 9))
        mat = rng.integers(-5, 6, size=(n, n)).astype(float)
        mat = np.triu(mat, -1)  # upper Hessenberg
        values, converged = hessenberg_eig(mat)
        assert converged
        exact_det = float(bareiss_determinant(mat.astype(int)))
        scale = max(1.0, abs(exact_det))
        assert abs(np.prod(values) - exact_det) <= 1e-9 * scale
        assert abs(values.sum() - np.trace(mat)) <= 1e-9 * max(1.0, abs(np.trace(mat)))


def test_hessenberg_eig_validation():
    with pytest.raises(ValueError):
        hessenberg_eig(np.ones((3, 4)))
    with pytest.raises(ValueError, match="cap of 200"):
        hessenberg_eig(np.eye(201))


def test_arnoldi_identity_breaks_down_immediately():
    state = arnoldi(lambda v: v, np.ones(6), k=5)
    assert state.breakdown
    assert state.steps == 1
    np.testing.assert_allclose(state.square, np.array([[1.0]]), atol=1e-14)


def test_arnoldi_recovers_diagonal_spectrum():
    diag = np.arange(1.0, 11.0)
    op = lambda v: diag * v
    state = arnoldi(op, np.ones(10), k=10)
    values, converged = hessenberg_eig(state.square)
    assert converged
    np.testing.assert_allclose(np.sort(values.real), diag, atol=1e-8)
    assert np.abs(values.imag).max() <= 1e-10


def test_arnoldi_relation_and_orthonormality():
    rng = np.random.default_rng(23)
    n, k = 60, 20
    dense = rng.standard_normal((n, n))
    state = arnoldi(lambda v: dense @ v, rng.standard_normal(n), k=k)
    assert not state.breakdown
    q = state.basis
    assert q.shape == (n, k + 1)
    gram = q.conj().T @ q
    assert np.abs(gram - np.eye(k + 1)).max() <= 1e-10
    residual = dense @ q[:, :k] - q @ state.hessenberg
    hnorm = np.linalg.norm(state.hessenberg)
    assert np.linalg.norm(residual) <= 1e-8 * hnorm
    assert isinstance(state, KrylovState)


def test_arnoldi_input_validation():
    with pytest.raises(ValueError, match="zero start"):
        arnoldi(lambda v: v, np.zeros(4), k=3)
    with pytest.raises(ValueError):
        arnoldi(lambda v: v, np.ones(4), k=0)
    with pytest.raises(ValueError, match="vector length"):
        arnoldi(lambda v: np.ones(3), np.ones(4), k=2)
