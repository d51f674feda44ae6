import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complexkg.data import swapped_identity
from complexkg.models import score_matrix
from complexkg.params import ModelKind, init_params
from complexkg.spectral import (NotNormalError, RankExceededError, block_tensor_decomposition,
                                commutator_residual, diagonalize_normal, is_normal, jacobi_eigh,
                                lift_to_normal, numerical_rank, principal_components,
                                rank_bounded_decomposition, read_matrix, singular_values,
                                split_symmetric_antisymmetric, write_matrix)

seeds = st.integers(0, 2**32 - 1)


def test_lift_examples():
    X = np.array([[0.0, 1.0], [0.0, 0.0]])
    Z = lift_to_normal(X)
    assert Z[0, 1] == 1 and Z[1, 0] == 1j
    S = np.array([[1.0, 2.0], [2.0, -3.0]])
    np.testing.assert_array_equal(lift_to_normal(S), (1 + 1j) * S)


def test_lift_rejects_bad_input():
    with pytest.raises(ValueError):
        lift_to_normal(np.ones((2, 3)))
    with pytest.raises(ValueError):
        lift_to_normal(np.array([[np.nan]]))


def test_is_normal_examples():
    assert is_normal(np.eye(4))
    assert not is_normal(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_jordan_block_refused():
    with pytest.raises(NotNormalError):
        diagonalize_normal(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_size_guard():
    with pytest.raises(ValueError):
        diagonalize_normal(np.eye(65))


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(1, 12))
def test_jacobi_matches_numpy(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    H = (A + A.conj().T) / 2
    lam, V = jacobi_eigh(H)
    np.testing.assert_allclose(lam, np.linalg.eigvalsh(H), atol=1e-10)
    np.testing.assert_allclose(V @ np.diag(lam) @ V.conj().T, H, atol=1e-10)
    np.testing.assert_allclose(V.conj().T @ V, np.eye(n), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=seeds, n=st.integers(2, 16))
def test_lift_is_normal_and_reconstructs(seed, n):
    X = np.random.default_rng(seed).normal(size=(n, n))
    Z = lift_to_normal(X)
    np.testing.assert_array_equal(Z.real, X)
    assert commutator_residual(Z) <= 1e-12 * np.linalg.norm(Z) ** 2
    d = diagonalize_normal(Z)
    assert d.unitarity_residual() <= 1e-8
    assert np.linalg.norm(d.reconstruct().real - X) <= 1e-8 * max(1.0, np.linalg.norm(X))


@settings(max_examples=20, deadline=None)
@given(seed=seeds, n=st.integers(2, 10))
def test_symmetric_has_real_spectrum(seed, n):
    A = np.random.default_rng(seed).normal(size=(n, n))
    d = diagonalize_normal(A + A.T)
    assert np.max(np.abs(d.W.imag)) <= 1e-10
    np.testing.assert_allclose(d.reconstruct(), A + A.T, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=seeds, n=st.integers(2, 10))
def test_antisymmetric_has_imaginary_spectrum(seed, n):
    A = np.random.default_rng(seed).normal(size=(n, n))
    d = diagonalize_normal(A - A.T)
    assert np.max(np.abs(d.W.real)) <= 1e-10
    assert np.linalg.norm(d.reconstruct() - (A - A.T)) <= 1e-8 * max(1.0, np.linalg.norm(A - A.T))


def test_degenerate_normal_matrix():
    # unitary conjugate of diag(1, 1, i, i, -1): repeated eigenvalues in both H1 and H2
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)))
    Z = Q @ np.diag([1, 1, 1j, 1j, -1]) @ Q.conj().T
    d = diagonalize_normal(Z)
    assert np.linalg.norm(d.reconstruct() - Z) <= 1e-10
    assert d.unitarity_residual() <= 1e-10


def test_eigenvalue_order():
    d = diagonalize_normal(np.diag([1.0, -3.0, 3.0, 2.0]).astype(complex))
    np.testing.assert_allclose(d.W, [3, -3, 2, 1], atol=1e-12)


def test_singular_values_and_rank():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 2)) @ rng.normal(size=(2, 6))
    np.testing.assert_allclose(singular_values(X), np.linalg.svd(X, compute_uv=False), atol=1e-10)
    assert numerical_rank(X) == 2
    assert numerical_rank(np.zeros((3, 3))) == 0


def test_rank_one_decomposition():
    rng = np.random.default_rng(2)
    X = np.outer(rng.normal(size=7), rng.normal(size=7))
    d = rank_bounded_decomposition(X, 1)
    assert d.rank <= 2
    assert np.linalg.norm(d.reconstruct().real - X) <= 1e-6 * max(1.0, np.linalg.norm(X))


def test_zero_matrix_decomposition():
    d = rank_bounded_decomposition(np.zeros((4, 4)), 1)
    assert d.rank == 0
    np.testing.assert_array_equal(d.reconstruct().real, np.zeros((4, 4)))


def test_rank_exceeded_names_rank():
    with pytest.raises(RankExceededError, match="3"):
        rank_bounded_decomposition(np.diag([1.0, 2.0, 3.0, 0.0]), 2)


def test_swapped_identity_exact():
    X = swapped_identity(30).astype(float)
    d = diagonalize_normal(lift_to_normal(X))
    assert np.linalg.norm(d.reconstruct().real - X) <= 1e-8 * np.linalg.norm(X)


@settings(max_examples=15, deadline=None)
@given(seed=seeds, n=st.integers(4, 12), data=st.data())
def test_rank_bounded_columns(seed, n, data):
    k = data.draw(st.integers(1, n // 2))
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, k)) @ rng.normal(size=(k, n))
    d = rank_bounded_decomposition(X, k)
    assert d.rank <= 2 * k
    assert np.linalg.norm(d.reconstruct().real - X) <= 1e-6 * max(1.0, np.linalg.norm(X))


def test_block_tensor_two_matrices():
    rng = np.random.default_rng(3)
    mats = [rng.normal(size=(4, 4)) for _ in range(2)]
    block = block_tensor_decomposition(mats)
    assert block.E.shape == (4, 8)
    assert not block.diagonals[0][4:].any()
    for i, X in enumerate(mats):
        assert np.linalg.norm(block.reconstruct(i).real - X) <= 1e-8 * max(1.0, np.linalg.norm(X))


def test_block_tensor_single_matrix_matches_direct():
    X = np.random.default_rng(4).normal(size=(5, 5))
    block = block_tensor_decomposition([X])
    direct = diagonalize_normal(lift_to_normal(X))
    np.testing.assert_allclose(block.diagonals[0], direct.W, atol=1e-12)


def test_block_tensor_shape_errors():
    with pytest.raises(ValueError):
        block_tensor_decomposition([np.eye(3), np.eye(4)])
    with pytest.raises(ValueError):
        block_tensor_decomposition([])


def test_split_special_cases():
    params = init_params(ModelKind("complex"), 6, 2, 3, seed=0)
    params.tensors["rel_im"][0] = 0.0
    params.tensors["rel_re"][1] = 0.0
    assert not split_symmetric_antisymmetric(params, 0)[1].any()
    assert not split_symmetric_antisymmetric(params, 1)[0].any()


def test_split_requires_complex():
    with pytest.raises(ValueError):
        split_symmetric_antisymmetric(init_params(ModelKind("distmult"), 3, 1, 2, seed=0), 0)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_split_exact(seed):
    params = init_params(ModelKind("complex"), 10, 3, 4, seed)
    r = seed % 3
    S, A = split_symmetric_antisymmetric(params, r)
    assert np.array_equal(S, S.T)
    assert np.array_equal(A, -A.T)
    assert np.max(np.abs(S + A - score_matrix(params, r))) <= 1e-12


def test_principal_components_against_svd():
    rng = np.random.default_rng(5)
    M = rng.normal(size=(20, 6)) * np.array([5, 3, 1, 0.5, 0.2, 0.1])
    coords, variances = principal_components(M, 2)
    centered = M - M.mean(axis=0)
    _, sv, vt = np.linalg.svd(centered, full_matrices=False)
    np.testing.assert_allclose(variances, sv[:2] ** 2 / 19, rtol=1e-9)
    np.testing.assert_allclose(np.abs(coords), np.abs(centered @ vt[:2].T), atol=1e-9)
    assert np.all(np.diff(variances) <= 0)
    with pytest.raises(ValueError):
        principal_components(M, 7)


def test_matrix_io_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    real = rng.normal(size=(3, 3))
    write_matrix(tmp_path / "r.tsv", real)
    np.testing.assert_array_equal(read_matrix(tmp_path / "r.tsv"), real)
    cplx = real + 1j * rng.normal(size=(3, 3))
    write_matrix(tmp_path / "c.tsv", cplx)
    np.testing.assert_array_equal(read_matrix(tmp_path / "c.tsv"), cplx)
    (tmp_path / "bad.tsv").write_text("1\t2\n3\n")
    with pytest.raises(ValueError):
        read_matrix(tmp_path / "bad.tsv")
