import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nystromkit.errors import NotPositiveDefinite, NotPsd, ParseError
from nystromkit.linalg import (FRO, NUC, OP, SchattenNorm, SpsdMatrix, as_norm, chol_spd, eig_sym,
                               orth, pinv, psd_sqrt, read_matrix, schatten_norm, write_matrix)

from conftest import random_spsd, seeds


# -- eig_sym -------------------------------------------------------------------

def test_eig_diagonal():
    lam, V = eig_sym(np.diag([3.0, 1.0, 0.0]))
    np.testing.assert_array_equal(lam, [3.0, 1.0, 0.0])
    np.testing.assert_allclose(np.abs(V), np.eye(3), atol=1e-15)


def test_eig_identity():
    np.testing.assert_array_equal(eig_sym(np.eye(4)).eigenvalues, np.ones(4))


def test_eig_two_by_two():
    np.testing.assert_allclose(eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]])).eigenvalues, [3.0, 1.0])


@given(seeds, st.integers(2, 12))
def test_eig_reconstruction(seed, n):
    A = random_spsd(np.random.default_rng(seed), n)
    lam, V = eig_sym(A)
    assert np.all(np.diff(lam) <= 0)
    assert np.linalg.norm(V.T @ V - np.eye(n)) <= 1e-10 * n
    assert np.linalg.norm(A - (V * lam) @ V.T) <= 1e-10 * np.linalg.norm(A)


def test_eig_rejects_nonfinite():
    with pytest.raises(ValueError):
        eig_sym(np.array([[np.nan, 0.0], [0.0, 1.0]]))


# -- SpsdMatrix ------------------------------------------------------------------

def test_spsd_symmetrizes_exactly(rng):
    M = rng.standard_normal((5, 5))
    A = SpsdMatrix(M @ M.T + 1e-9 * rng.standard_normal((5, 5)))
    assert np.array_equal(A.entries, A.entries.T)
    with pytest.raises(ValueError):
        A.entries[0, 0] = 1.0


def test_spsd_rejects_indefinite():
    with pytest.raises(NotPsd):
        SpsdMatrix(np.diag([1.0, -0.5]))


def test_spsd_accepts_roundoff_negative():
    A = SpsdMatrix(np.diag([1.0, -1e-13]))
    assert A.dim == 2


# -- Schatten norms ----------------------------------------------------------------

def test_norms_of_diagonal():
    M = np.diag([3.0, 4.0])
    assert schatten_norm(M, OP) == 4.0
    assert schatten_norm(M, FRO) == 5.0
    assert schatten_norm(M, NUC) == 7.0


def test_norms_of_zero_matrix():
    for norm in ("op", "F", "Tr", SchattenNorm(4)):
        assert schatten_norm(np.zeros((2, 3)), norm) == 0.0


def test_norm_aliases():
    assert as_norm("fro") == FRO == SchattenNorm(2)
    assert as_norm("nuc") == NUC == as_norm("Tr") == SchattenNorm(1)
    assert as_norm("2") == OP or as_norm("op") == OP
    assert as_norm(math.inf) == OP
    with pytest.raises(ValueError):
        SchattenNorm(0.5)


@given(seeds, st.integers(1, 6), st.integers(1, 6))
def test_schatten_special_cases(seed, m, n):
    M = np.random.default_rng(seed).standard_normal((m, n))
    s = np.linalg.svd(M, compute_uv=False)
    assert schatten_norm(M, SchattenNorm(2)) == pytest.approx(np.sqrt(np.sum(M * M)), rel=1e-12)
    assert schatten_norm(M, SchattenNorm(1)) == pytest.approx(s.sum(), rel=1e-12)
    assert schatten_norm(M, SchattenNorm(math.inf)) == pytest.approx(s.max(), rel=1e-12)
    s4 = schatten_norm(M, SchattenNorm(4))
    assert s4**4 == pytest.approx(schatten_norm(M.T @ M, FRO) ** 2, rel=1e-9)
    assert s4 == pytest.approx(math.sqrt(np.linalg.norm(M.T @ M)), rel=1e-10)
    op, fro, nuc = (schatten_norm(M, x) for x in (OP, FRO, NUC))
    assert op <= fro * (1 + 1e-12) and fro <= nuc * (1 + 1e-12) and s4 <= fro * (1 + 1e-12)


# -- psd_sqrt ----------------------------------------------------------------------

def test_sqrt_examples():
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])).entries, np.diag([2.0, 3.0]))
    np.testing.assert_allclose(psd_sqrt(np.eye(3)).entries, np.eye(3))
    S = psd_sqrt(np.array([[2.0, 1.0], [1.0, 2.0]])).entries
    np.testing.assert_allclose(np.linalg.eigvalsh(S), [1.0, math.sqrt(3)])
    np.testing.assert_allclose(S @ np.array([1.0, 1.0]), math.sqrt(3) * np.array([1.0, 1.0]))


def test_sqrt_rejects_indefinite():
    with pytest.raises(NotPsd):
        psd_sqrt(SpsdMatrix(np.diag([1.0, -1.0]), check=False))


@given(seeds, st.integers(1, 10))
def test_sqrt_roundtrip(seed, n):
    A = random_spsd(np.random.default_rng(seed), n, rank=max(1, n // 2))
    S = psd_sqrt(A).entries
    assert np.linalg.norm(S @ S - A) <= 1e-9 * np.linalg.norm(A)
    S4 = np.linalg.matrix_power(S, 4)
    # zero eigenvalues of S^4 carry eps-sized noise whose square root is ~1e-8
    assert np.linalg.norm(psd_sqrt(S4).entries - S @ S) <= 10 * n * math.sqrt(np.finfo(float).eps) * np.linalg.norm(S4)


@given(seeds, st.integers(1, 10))
def test_sqrt_double_roundtrip_full_rank(seed, n):
    S = psd_sqrt(random_spsd(np.random.default_rng(seed), n)).entries
    R = psd_sqrt(psd_sqrt(np.linalg.matrix_power(S, 4))).entries
    assert np.linalg.norm(R - S) <= 1e-9 * np.linalg.norm(S)


# -- Cholesky ------------------------------------------------------------------------

def test_chol_examples():
    np.testing.assert_allclose(chol_spd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    np.testing.assert_allclose(chol_spd(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(chol_spd(np.array([[4.0, 2.0], [2.0, 5.0]])), [[2.0, 1.0], [0.0, 2.0]])


def test_chol_jitter_rescues_semidefinite():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    R = chol_spd(A)
    assert np.allclose(np.triu(R), R)
    assert np.linalg.norm(R.T @ R - A) <= 1e-9 * np.linalg.norm(A)


def test_chol_fails_on_indefinite():
    with pytest.raises(NotPositiveDefinite):
        chol_spd(np.diag([1.0, -1.0]))


@given(seeds, st.integers(1, 10))
def test_chol_reconstruction(seed, n):
    A = random_spsd(np.random.default_rng(seed), n)
    R = chol_spd(A)
    assert np.allclose(np.triu(R), R)
    assert np.linalg.norm(R.T @ R - A) <= 1e-9 * np.linalg.norm(A)


# -- pinv and orth ---------------------------------------------------------------------

def test_pinv_examples(rng):
    np.testing.assert_allclose(pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    Q, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    np.testing.assert_allclose(pinv(Q), Q.T, atol=1e-14)
    M = rng.standard_normal((2, 5))
    np.testing.assert_allclose(M @ pinv(M), np.eye(2), atol=1e-8)


@given(seeds, st.integers(1, 6), st.integers(1, 6))
def test_pinv_penrose_identities(seed, m, n):
    M = np.random.default_rng(seed).standard_normal((m, n))
    P = pinv(M)
    scale = np.linalg.norm(M, 2)
    assert np.linalg.norm(M @ P @ M - M) <= 1e-8 * scale
    assert np.linalg.norm(M @ P - (M @ P).T) <= 1e-8 * max(scale, 1.0)


def test_orth_drops_dependent_columns(rng):
    X = rng.standard_normal((8, 3))
    Q = orth(np.column_stack([X, X[:, :1] + X[:, 1:2]]))
    assert Q.shape == (8, 3)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-13)
    assert orth(np.zeros((4, 2))).shape == (4, 0)


# -- matrix text format ------------------------------------------------------------------

def test_matrix_file_roundtrip(tmp_path, rng):
    M = rng.standard_normal((3, 4))
    path = tmp_path / "m.txt"
    write_matrix(path, M)
    assert path.read_text().splitlines()[0] == "3 4"
    np.testing.assert_array_equal(read_matrix(path), M)


@pytest.mark.parametrize("body, line", [
    ("2 2\n1 2\n3\n", 3),
    ("2 2\n1 x\n3 4\n", 2),
    ("two 2\n", 1),
])
def test_matrix_file_errors_report_lines(tmp_path, body, line):
    path = tmp_path / "bad.txt"
    path.write_text(body)
    with pytest.raises(ParseError, match=f":{line}:"):
        read_matrix(path)
