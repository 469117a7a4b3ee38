import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp

from asmg import DimensionError, FactorizationError, InternalError
from asmg import la


def test_dense_cholesky_small_oracle():
    # [[4,1],[1,3]] x = [1,2] has the closed-form solution (1/11, 7/11)
    A = np.array([[4.0, 1.0], [1.0, 3.0]])
    f = la.dense_cholesky(A)
    x = la.solve(f, np.array([1.0, 2.0]))
    assert np.allclose(x, [1.0 / 11.0, 7.0 / 11.0], rtol=1e-15)


def test_dense_cholesky_residual():
    rng = np.random.Generator(np.random.PCG64(0))
    G = rng.standard_normal((40, 40))
    A = G @ G.T + 40 * np.eye(40)
    f = la.dense_cholesky(A)
    b = rng.standard_normal(40)
    x = la.solve(f, b)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_cholesky_rejects_indefinite():
    with pytest.raises(FactorizationError):
        la.dense_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_solve_checks_shape():
    f = la.dense_cholesky(np.eye(3))
    with pytest.raises(DimensionError):
        la.solve(f, np.ones(4))


def test_dense_lu_unsymmetric():
    A = np.array([[0.0, 2.0], [3.0, 1.0]])  # needs pivoting
    f = la.dense_lu(A)
    x = la.solve(f, np.array([2.0, 4.0]))
    assert np.allclose(x, [1.0, 1.0], rtol=1e-15)


def test_refinement_recovers_digits_on_ill_conditioned():
    # graded diagonal plus rank-one coupling: kappa ~ 1e12; the refined
    # solve should sit at the residual floor of the matvec itself
    n = 60
    rng = np.random.Generator(np.random.PCG64(1))
    d = np.logspace(0, -12, n)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = (Q * d) @ Q.T
    A = 0.5 * (A + A.T) + 1e-13 * np.eye(n)
    f = la.dense_cholesky(A)
    x_true = rng.standard_normal(n)
    b = A @ x_true
    x = la.solve(f, b)
    assert np.linalg.norm(A @ x - b) <= 1e-13 * np.linalg.norm(b)


def test_triple_product_matches_dense():
    rng = np.random.Generator(np.random.PCG64(2))
    R = sp.random(12, 20, density=0.3, random_state=3, format="csr")
    A = sp.random(12, 12, density=0.4, random_state=4, format="csr")
    A = A + A.T
    P = la.triple_product(R.T.tocsr(), A, R)
    assert np.allclose(P.toarray(), R.T.toarray() @ A.toarray() @ R.toarray())


def test_extract_and_permute():
    A = sp.csr_matrix(np.arange(16.0).reshape(4, 4))
    S = la.extract(A, np.array([1, 3]), np.array([0, 2]))
    assert np.array_equal(S.toarray(), [[4.0, 6.0], [12.0, 14.0]])
    p = np.array([2, 0, 3, 1])
    P = la.permute_sym(A, p)
    assert np.array_equal(P.toarray(), A.toarray()[np.ix_(p, p)])


def test_symmetry_checks():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert la.is_symmetric(A)
    B = sp.csr_matrix(np.array([[2.0, 1.0], [0.5, 2.0]]))
    assert not la.is_symmetric(B)
    with pytest.raises(InternalError):
        la.check_symmetry(B, what="test matrix")


def test_matrix_market_round_trip(tmp_path):
    rng = np.random.Generator(np.random.PCG64(5))
    A = sp.random(9, 9, density=0.35, random_state=6, format="csr")
    path = tmp_path / "mat.mtx"
    la.write_matrix_market(path, A)
    B = scipy.io.mmread(path).tocsr()
    assert np.allclose(A.toarray(), B.toarray(), rtol=0, atol=0)
