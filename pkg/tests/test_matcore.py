import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from builders import gauss_solve, taylor_expm
from phasemix import matcore
from phasemix.errors import ShapeError, SingularMatrixError, UnsupportedSpectrumError


def test_expm_of_zero_is_identity():
    np.testing.assert_array_equal(matcore.expm(np.zeros((2, 2)), 1.0), np.eye(2))


def test_expm_diagonal():
    np.testing.assert_allclose(
        matcore.expm(np.diag([-1.0, -2.0]), 1.0), np.diag([0.3678794, 0.1353353]), atol=1e-7
    )


def test_expm_time_zero_exact():
    A = np.array([[-3.0, 1.0], [2.0, -5.0]])
    assert np.array_equal(matcore.expm(A, 0.0), np.eye(2))


def test_expm_rejects_negative_time_and_bad_shape():
    with pytest.raises(ShapeError):
        matcore.expm(np.eye(2), -1.0)
    with pytest.raises(ShapeError):
        matcore.expm(np.ones((2, 3)))
    with pytest.raises(ShapeError):
        matcore.expm(np.array([[np.nan]]))


def test_expm_of_nilpotent_block():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_allclose(matcore.expm(A, 3.0), [[1.0, 3.0], [0.0, 1.0]], atol=1e-15)


def _generator(rng, n):
    Q = rng.uniform(0, 2, size=(n, n))
    np.fill_diagonal(Q, 0)
    np.fill_diagonal(Q, -Q.sum(axis=1) - rng.uniform(0, 1, n))
    return Q


@pytest.mark.parametrize("seed", range(10))
def test_expm_matches_taylor_oracle(seed):
    rng = np.random.default_rng(seed)
    A = _generator(rng, 1 + seed % 6)
    for t in (0.01, 1.0, 7.5):
        np.testing.assert_allclose(matcore.expm(A, t), taylor_expm(A, t), rtol=1e-11, atol=1e-13)


@given(
    arrays(np.float64, (4, 4), elements=st.floats(-3, 3)),
    st.floats(0, 2),
    st.floats(0, 2),
)
@settings(max_examples=60, deadline=None)
def test_expm_semigroup(A, s, t):
    lhs = matcore.expm(A, s + t)
    rhs = matcore.expm(A, s) @ matcore.expm(A, t)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * max(1.0, np.abs(lhs).max()))


def test_solve_examples():
    B = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matcore.solve(np.eye(2), B), B)
    np.testing.assert_allclose(matcore.solve(np.diag([2.0, 4.0]), np.eye(2)), np.diag([0.5, 0.25]))


def test_solve_singular():
    with pytest.raises(SingularMatrixError):
        matcore.solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
    # a phase generator without exits
    with pytest.raises(SingularMatrixError):
        matcore.solve(np.array([[-1.0, 1.0], [1.0, -1.0]]), np.ones(2))


@pytest.mark.parametrize("seed", range(10))
def test_solve_matches_elimination(seed):
    rng = np.random.default_rng(100 + seed)
    A = _generator(rng, 2 + seed % 5)
    b = rng.normal(size=len(A))
    np.testing.assert_allclose(matcore.solve(A, b), gauss_solve(A, b), rtol=1e-10, atol=1e-12)


def test_eigen_examples():
    sp = matcore.eigen(np.diag([-1.0, -2.0, -3.0]))
    assert sp.all_real_and_simple
    np.testing.assert_allclose(sorted(sp.real()), [-3, -2, -1])
    assert sp.dominant == -1
    rot = matcore.eigen(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert not rot.all_real_and_simple
    np.testing.assert_allclose(sorted(rot.eigenvalues.imag), [-1, 1])
    with pytest.raises(UnsupportedSpectrumError):
        rot.real()


def test_eigen_repeated_is_not_simple():
    assert not matcore.eigen(np.diag([-1.0, -1.0, -2.0])).all_real_and_simple


@pytest.mark.parametrize("seed", range(8))
def test_eigenvalues_are_determinant_roots(seed):
    rng = np.random.default_rng(200 + seed)
    A = _generator(rng, 3 + seed % 3)
    for lam in matcore.eigen(A).eigenvalues:
        M = A - lam * np.eye(len(A))
        assert abs(np.linalg.det(M)) < 1e-9 * max(1.0, np.abs(A).max()) ** len(A)


def test_lagrange_coefficient_of_diagonal():
    A = np.diag([-1.0, -2.0])
    sp = matcore.eigen(A)
    l = int(np.argmin(np.abs(sp.eigenvalues + 1)))
    np.testing.assert_allclose(matcore.lagrange_coefficient(A, sp, l), np.diag([1.0, 0.0]), atol=1e-15)


@pytest.mark.parametrize("seed", range(8))
def test_lagrange_coefficients_reconstruct_exponential(seed):
    rng = np.random.default_rng(300 + seed)
    A = np.triu(rng.uniform(0, 1, (4, 4)), 1) - np.diag(rng.permutation([0.5, 1.0, 1.7, 2.9]))
    sp = matcore.eigen(A)
    Ls = [matcore.lagrange_coefficient(A, sp, l) for l in range(4)]
    np.testing.assert_allclose(sum(Ls), np.eye(4), atol=1e-11)
    for L in Ls:
        np.testing.assert_allclose(L @ L, L, atol=1e-10)
    t = 1.3
    recon = sum(np.exp(lam * t) * L for lam, L in zip(sp.real(), Ls))
    np.testing.assert_allclose(recon, taylor_expm(A, t), atol=1e-11)


def test_lagrange_coefficient_refuses_unsupported_spectrum():
    A = np.diag([-1.0, -1.0])
    with pytest.raises(UnsupportedSpectrumError):
        matcore.lagrange_coefficient(A, matcore.eigen(A), 0)


def test_commutator_examples():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matcore.commutator(A, A), np.zeros((2, 2)))
    np.testing.assert_array_equal(matcore.commutator(A, np.eye(2)), np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        matcore.commutator(A, np.eye(3))


def test_commutator_of_exponential_example():
    a1, a2 = 1.3, 0.4
    B = np.array([[-(a1 + a2), a1, a2], [0, -a2, 0], [0, 0, -a1]])
    H1 = np.diag([1.0, 0.0, 1.0])
    expected = np.zeros((3, 3))
    expected[0, 1] = -a1
    np.testing.assert_allclose(matcore.commutator(B, H1), expected, atol=1e-15)


@given(
    arrays(np.float64, (3, 3), elements=st.floats(-5, 5)),
    arrays(np.float64, (3, 3), elements=st.floats(-5, 5)),
)
@settings(max_examples=50, deadline=None)
def test_commutator_is_antisymmetric(A, B):
    np.testing.assert_allclose(matcore.commutator(A, B), -matcore.commutator(B, A), atol=1e-12)
