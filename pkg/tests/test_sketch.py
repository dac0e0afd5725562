import numpy as np
import pytest
from hypothesis import given, strategies as st

from nystromkit.errors import InvalidRank, ShapeMismatch, SingularK11
from nystromkit.linalg import eig_sym
from nystromkit.sketch import (CovarianceSpec, conditional_draw_params, conditional_resample,
                               draw_sketch, make_rng, partition_covariance, split_sketch)

from conftest import random_spsd, seeds


def test_zero_covariance_gives_zero_sketch():
    assert not np.any(draw_sketch(CovarianceSpec(np.zeros((4, 4))), 3, seed=7))


def test_identity_sample_covariance():
    Om = draw_sketch(CovarianceSpec.identity(3), 100_000, seed=1)
    emp = Om @ Om.T / Om.shape[1]
    assert np.linalg.norm(emp - np.eye(3)) <= 0.05 * np.linalg.norm(np.eye(3))


def test_degenerate_covariance_rows():
    Om = draw_sketch(CovarianceSpec(np.diag([4.0, 0.0])), 10_000, seed=2)
    assert not np.any(Om[1])
    assert np.var(Om[0]) == pytest.approx(4.0, rel=0.05)


def test_sketch_determinism_and_independence():
    cov = CovarianceSpec.identity(100)
    a = draw_sketch(cov, 100, seed=5)
    assert np.array_equal(a, draw_sketch(cov, 100, seed=5))
    b = draw_sketch(cov, 100, seed=6)
    assert abs(np.corrcoef(a.ravel(), b.ravel())[0, 1]) <= 0.05
    c = draw_sketch(cov, 100, seed=5, stream=1)
    assert abs(np.corrcoef(a.ravel(), c.ravel())[0, 1]) <= 0.05


def test_make_rng_is_philox_keyed_by_seed_and_stream():
    x = make_rng(3, 4).standard_normal(5)
    np.testing.assert_array_equal(x, make_rng(3, 4).standard_normal(5))
    assert not np.array_equal(x, make_rng(4, 3).standard_normal(5))


@given(seeds, st.integers(2, 8))
def test_sqrt_K_squares_to_K(seed, n):
    K = random_spsd(np.random.default_rng(seed), n, rank=max(1, n - 2))
    S = CovarianceSpec(K).sqrt_K
    assert np.linalg.norm(S @ S - K) <= 1e-9 * np.linalg.norm(K)


def test_sqrt_K_drops_roundoff_eigenvalues(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    K = (Q * np.array([1, 0.5, 0.1, 1e-17, 1e-18, 0.0])) @ Q.T
    cov = CovarianceSpec(K)
    assert cov.rank_estimate == 3
    assert np.linalg.matrix_rank(cov.sqrt_K, tol=1e-10) == 3


def test_split_sketch_rotates(rng):
    A = random_spsd(rng, 6)
    eig = eig_sym(A)
    Om = rng.standard_normal((6, 4))
    d = split_sketch(Om, eig, 2)
    np.testing.assert_array_equal(np.vstack([d.Omega1, d.Omega2]), eig.eigenvectors.T @ Om)
    with pytest.raises(ShapeMismatch):
        split_sketch(rng.standard_normal((5, 4)), eig, 2)


# -- partition ---------------------------------------------------------------------------

def test_partition_identity(rng):
    eig = eig_sym(random_spsd(rng, 6))
    pc = partition_covariance(CovarianceSpec.identity(6), eig, 2)
    np.testing.assert_allclose(pc.K11, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(pc.K21, 0, atol=1e-14)
    np.testing.assert_allclose(pc.K22_1, np.eye(4), atol=1e-14)
    assert pc.inv_K11_opnorm == pytest.approx(1.0)


def test_partition_aligned(rng):
    eig = eig_sym(random_spsd(rng, 5))
    lam = np.array([5.0, 4.0, 3.0, 2.0, 1.0])
    K = (eig.eigenvectors * lam) @ eig.eigenvectors.T
    pc = partition_covariance(CovarianceSpec(K), eig, 2)
    np.testing.assert_allclose(pc.K22_1, np.diag(lam[2:]), atol=1e-12)
    np.testing.assert_allclose(pc.K21, 0, atol=1e-12)
    assert pc.inv_K11_opnorm == pytest.approx(1 / 4)


def test_partition_matches_block_formula(rng):
    A = random_spsd(rng, 5)
    K = random_spsd(rng, 5)
    eig = eig_sym(A)
    pc = partition_covariance(CovarianceSpec(K), eig, 2)
    Kt = eig.eigenvectors.T @ K @ eig.eigenvectors
    schur = Kt[2:, 2:] - Kt[2:, :2] @ np.linalg.inv(Kt[:2, :2]) @ Kt[:2, 2:]
    np.testing.assert_allclose(pc.K22_1, schur, atol=1e-10 * np.linalg.norm(Kt))
    np.testing.assert_allclose(pc.assemble(), Kt, atol=1e-10 * np.linalg.norm(Kt))
    assert pc.inv_K11_opnorm == pytest.approx(np.linalg.norm(np.linalg.inv(Kt[:2, :2]), 2), rel=1e-10)


def test_partition_errors(rng):
    eig = eig_sym(np.diag([3.0, 2.0, 1.0]))
    with pytest.raises(SingularK11):
        partition_covariance(CovarianceSpec(np.diag([0.0, 1.0, 1.0])), eig, 1)
    with pytest.raises(InvalidRank):
        partition_covariance(CovarianceSpec.identity(3), eig, 3)
    with pytest.raises(InvalidRank):
        partition_covariance(CovarianceSpec.identity(3), eig, 0)


@given(seeds, st.floats(0.01, 100.0))
def test_partition_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    A, K = random_spsd(rng, 6), random_spsd(rng, 6)
    eig = eig_sym(A)
    pc = partition_covariance(CovarianceSpec(K), eig, 3)
    pcc = partition_covariance(CovarianceSpec(c * K), eig, 3)
    np.testing.assert_allclose(pcc.K22_1, c * pc.K22_1, atol=1e-9 * c * np.linalg.norm(pc.K22_1))
    assert pcc.inv_K11_opnorm * c == pytest.approx(pc.inv_K11_opnorm, rel=1e-9)
    assert np.linalg.eigvalsh(pc.K22_1)[0] >= -1e-12


# -- conditional distribution --------------------------------------------------------------

def test_conditional_params_identity(rng):
    eig = eig_sym(random_spsd(rng, 5))
    pc = partition_covariance(CovarianceSpec.identity(5), eig, 2)
    mean, root = conditional_draw_params(pc, rng.standard_normal((2, 4)))
    np.testing.assert_allclose(mean, 0, atol=1e-14)
    np.testing.assert_allclose(root, np.eye(3), atol=1e-12)


def test_conditional_mean_zero_when_uncorrelated(rng):
    eig = eig_sym(np.diag([4.0, 3.0, 2.0, 1.0]))
    pc = partition_covariance(CovarianceSpec(np.diag([1.0, 2.0, 3.0, 4.0])), eig, 2)
    mean, _ = conditional_draw_params(pc, 100 * rng.standard_normal((2, 3)))
    np.testing.assert_allclose(mean, 0, atol=1e-12)


def test_conditional_resampling_mean(rng):
    A, K = random_spsd(rng, 5), random_spsd(rng, 5)
    pc = partition_covariance(CovarianceSpec(K), eig_sym(A), 2)
    Om1 = rng.standard_normal((2, 6))
    params = conditional_draw_params(pc, Om1)
    gen = make_rng(11)
    draws = np.stack([conditional_resample(pc, Om1, gen, params) for _ in range(10_000)])
    emp = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(draws.shape[0])
    assert np.all(np.abs(emp - pc.tangent @ Om1) <= 5 * se)
    with pytest.raises(ShapeMismatch):
        conditional_draw_params(pc, rng.standard_normal((3, 6)))
