import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nystromkit.bounds import (BoundConstants, QualityFactors, bound_constants, bounds_report,
                               expected_bound, quality_factors, quality_factors_for,
                               rsvd_expected_frob_bound, sigma2_norms, tail_bound,
                               validate_expectation_mc, validate_tail_mc)
from nystromkit.errors import InvalidOversampling, InvalidRank, InvalidTrials, ZeroTail
from nystromkit.linalg import eig_sym
from nystromkit.sketch import CovarianceSpec, partition_covariance

from conftest import random_spsd, seeds

KEYS = ("op", "F", "Tr")


def unit_factors(k, beta=1.0, delta=0.0):
    return QualityFactors({key: beta for key in KEYS}, {key: delta for key in KEYS}, 1.0, k)


def ones_tail():
    return {"op": 1.0, "F": 1.0, "Tr": 1.0}


def dense_factors(A, K, k):
    """Second implementation from raw blocks with explicit inverses and SVD norms."""
    lam, U = np.linalg.eigh(A)
    lam, U = lam[::-1], U[:, ::-1]
    Kt = U.T @ K @ U
    K11i = np.linalg.inv(Kt[:k, :k])
    K21 = Kt[k:, :k]
    schur = Kt[k:, k:] - K21 @ K11i @ K21.T
    S = np.diag(np.sqrt(lam[k:]))
    X = S @ schur @ S
    Y = S @ K21 @ K11i @ K11i @ K21.T @ S
    out = {}
    for key, ordv in (("op", 2), ("F", "fro"), ("Tr", "nuc")):
        denom = np.linalg.norm(np.diag(lam[k:]), ordv)
        out[key] = (np.linalg.norm(X, ordv) / denom * np.linalg.norm(K11i, 2),
                    np.linalg.norm(Y, ordv) / denom)
    return out


# -- quality factors -------------------------------------------------------------------------

def test_identity_factors(rng):
    qf, _ = quality_factors_for(random_spsd(rng, 6), np.eye(6), 2)
    for key in KEYS:
        assert qf.beta[key] == pytest.approx(1.0)
        assert qf.delta[key] == pytest.approx(0.0, abs=1e-14)


def test_aligned_factors_hand_formula(rng):
    sig = np.array([8.0, 4.0, 2.0, 1.0, 0.5])
    lam = np.array([1.0, 3.0, 2.0, 0.5, 4.0])
    A = np.diag(sig)
    qf, _ = quality_factors_for(A, np.diag(lam), 2)
    expected = np.max(lam[2:] * sig[2:]) / sig[2] * np.max(1 / lam[:2])
    assert qf.beta["op"] == pytest.approx(expected, rel=1e-12)
    for key in KEYS:
        assert qf.delta[key] == pytest.approx(0.0, abs=1e-14)


def test_factors_match_dense_oracle(rng):
    A, K = random_spsd(rng, 6), random_spsd(rng, 6)
    qf, _ = quality_factors_for(A, K, 2)
    ref = dense_factors(A, K, 2)
    for key in KEYS:
        assert qf.beta[key] == pytest.approx(ref[key][0], rel=1e-10)
        assert qf.delta[key] == pytest.approx(ref[key][1], rel=1e-10)


def test_zero_tail():
    eig = eig_sym(np.diag([2.0, 1.0, 0.0]))
    pc = partition_covariance(CovarianceSpec.identity(3), eig, 2)
    with pytest.raises(ZeroTail):
        quality_factors(pc, [0.0])


@given(seeds, st.floats(0.01, 100.0))
def test_factor_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    A, K = random_spsd(rng, 6), random_spsd(rng, 6)
    qf, s2 = quality_factors_for(A, K, 3)
    qc, _ = quality_factors_for(A, c * K, 3)
    consts = BoundConstants(3, 5)
    for key in KEYS:
        assert qf.beta[key] >= 0 and qf.delta[key] >= 0
        assert qc.beta[key] == pytest.approx(qf.beta[key], rel=1e-8)
        assert qc.delta[key] == pytest.approx(qf.delta[key], rel=1e-8, abs=1e-14)
        assert expected_bound(key, qc, consts, s2) == pytest.approx(expected_bound(key, qf, consts, s2), rel=1e-8)


# -- constants -------------------------------------------------------------------------------

def test_constants_examples():
    c = bound_constants(2, 4)
    assert c.c1 == pytest.approx(11 / 6)
    assert c.c2 == pytest.approx(5 / 6)
    assert c.d1 == pytest.approx(1.2)
    assert c.d2 == pytest.approx(6 * math.e**2 / 25)
    assert c.d2 == pytest.approx(1.77337, abs=1e-5)
    assert c.d3 == pytest.approx(2.50793, abs=1e-5)
    assert c.d3 == pytest.approx(math.sqrt(2) * c.d2)
    assert bound_constants(10, 5).d1 == pytest.approx(5.0)


def test_constants_need_p4():
    with pytest.raises(InvalidOversampling):
        bound_constants(2, 3)
    with pytest.raises(InvalidOversampling):
        BoundConstants(2, 3).c1


@given(st.integers(1, 50), st.integers(4, 50))
def test_constants_positive(k, p):
    c = bound_constants(k, p)
    assert min(c.c1, c.c2, c.d1, c.d2, c.d3) > 0


# -- expectation and tail bounds ----------------------------------------------------------------

def test_expected_bound_examples():
    consts = BoundConstants(2, 4)
    qf = unit_factors(2)
    assert expected_bound("Tr", qf, consts, ones_tail()) == pytest.approx(5 / 3)
    assert expected_bound("op", qf, consts, ones_tail()) == pytest.approx(3 + 1.2 * math.e**2)
    assert expected_bound("op", qf, consts, ones_tail()) == pytest.approx(11.8669, abs=1e-4)


def test_ideal_covariance_bounds_are_tail_norms():
    s = {"op": 2.0, "F": 3.0, "Tr": 5.0}
    qf = unit_factors(3, beta=0.0)
    consts = BoundConstants(3, 6)
    for key in KEYS:
        assert expected_bound(key, qf, consts, s) == s[key]
        assert tail_bound(key, qf, consts, s, 2.5, 1.5)[0] == s[key]


def test_hypotheses_enforced():
    qf = unit_factors(1)
    with pytest.raises(InvalidRank):
        expected_bound("Tr", qf, BoundConstants(1, 4), ones_tail())
    qf = unit_factors(2)
    with pytest.raises(InvalidOversampling):
        expected_bound("F", qf, BoundConstants(2, 3), ones_tail())
    assert expected_bound("Tr", qf, BoundConstants(2, 2), ones_tail()) > 0
    with pytest.raises(InvalidOversampling):
        tail_bound("op", qf, BoundConstants(2, 3), ones_tail(), 2, 2)
    with pytest.raises(ValueError):
        tail_bound("op", qf, BoundConstants(2, 4), ones_tail(), 0.5, 2)


def test_tail_bound_example():
    rhs, prob = tail_bound("op", unit_factors(2), BoundConstants(2, 4), ones_tail(), 1.0, 1.0)
    assert rhs == pytest.approx(1 + 4 * (1.2 + 1.77337) + 4 * 1.77337, abs=1e-3)
    assert rhs == pytest.approx(19.987, abs=1e-3)
    assert prob == pytest.approx(2 + math.exp(-0.5))


def test_tail_probability_limit():
    _, prob = tail_bound("F", unit_factors(2), BoundConstants(2, 8), ones_tail(), 1e6, 2.0)
    assert prob == pytest.approx(math.exp(-2.0), rel=1e-9)


@given(st.sampled_from(KEYS), st.floats(1, 5), st.floats(1, 5), st.floats(0, 1), st.floats(0, 1))
def test_tail_monotone(key, t, u, dt, du):
    qf = QualityFactors({"op": 0.7, "F": 1.3, "Tr": 0.4}, {"op": 0.2, "F": 0.1, "Tr": 0.3}, 1.0, 3)
    s = {"op": 1.0, "F": 1.5, "Tr": 2.5}
    consts = BoundConstants(3, 6)
    r0, p0 = tail_bound(key, qf, consts, s, t, u)
    r1, p1 = tail_bound(key, qf, consts, s, t + dt, u + du)
    assert r1 >= r0 and p1 <= p0


@given(seeds, st.integers(2, 4), st.integers(4, 8))
def test_expected_bound_dominates_tail_norm(seed, k, p):
    rng = np.random.default_rng(seed)
    A, K = random_spsd(rng, 10), random_spsd(rng, 10)
    qf, s2 = quality_factors_for(A, K, k)
    for key in KEYS:
        assert expected_bound(key, qf, BoundConstants(k, p), s2) >= s2[key]


def test_sigma2_norms():
    s = sigma2_norms([3.0, 4.0])
    assert s == pytest.approx({"op": 4.0, "F": 5.0, "Tr": 7.0})


# -- randomized SVD bounds -----------------------------------------------------------------------

def test_rsvd_identity_recovers_standard_bound(rng):
    B = rng.standard_normal((12, 8))
    s = np.linalg.svd(B, compute_uv=False)
    tail = np.sum(s[3:] ** 2)
    assert rsvd_expected_frob_bound("ours", B, np.eye(8), 3, 4) == pytest.approx((1 + 3 / 3) * tail)


def test_rsvd_ideal_covariance(rng):
    B = rng.standard_normal((12, 8))
    _, s, Vt = np.linalg.svd(B)
    K = Vt[:3].T @ np.diag([1.0, 2.0, 3.0]) @ Vt[:3]
    assert rsvd_expected_frob_bound("ours", B, K, 3, 4) == pytest.approx(np.sum(s[3:] ** 2), rel=1e-8)


@given(seeds)
def test_rsvd_ours_below_prior(seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((10, 7))
    K = random_spsd(rng, 7)
    ours = rsvd_expected_frob_bound("ours", B, K, 2, 3)
    prior = rsvd_expected_frob_bound("prior", B, K, 2, 3)
    assert ours <= prior * (1 + 1e-12)


def test_rsvd_bound_validates_arguments(rng):
    with pytest.raises(InvalidOversampling):
        rsvd_expected_frob_bound("ours", np.eye(4), np.eye(4), 2, 1)
    with pytest.raises(ValueError):
        rsvd_expected_frob_bound("other", np.eye(4), np.eye(4), 2, 2)


# -- Monte Carlo audits ----------------------------------------------------------------------------

A20 = np.diag(2.0 ** -np.arange(20))


def test_validate_expectation_identity():
    res = validate_expectation_mc(A20, np.eye(20), 5, 5, "Tr", trials=2000, seed=1)
    assert res.passed and res.mean_err <= res.bound


def test_validate_expectation_ideal():
    K = np.diag(np.r_[np.ones(5), np.zeros(15)])
    res = validate_expectation_mc(A20, K, 5, 5, "F", trials=200, seed=2)
    tail = np.linalg.norm(np.diag(A20)[5:])
    assert abs(res.mean_err - tail) <= 3 * res.stderr + 1e-12
    assert res.passed


def test_validate_requires_trials():
    with pytest.raises(InvalidTrials):
        validate_expectation_mc(A20, np.eye(20), 5, 5, "Tr", trials=50, seed=0)
    with pytest.raises(InvalidTrials):
        validate_tail_mc(A20, np.eye(20), 5, 5, "Tr", 2, 3, trials=500, seed=0)


def test_validate_tail_identity():
    A = np.diag(2.0 ** -np.arange(12))
    res = validate_tail_mc(A, np.eye(12), 3, 6, "op", 2.0, 3.0, trials=1000, seed=3)
    assert res.predicted_failure_prob == pytest.approx(2 * 2.0**-6 + math.exp(-4.5))
    assert res.predicted_failure_prob <= 0.0424
    assert res.passed


def test_validate_tail_vacuous():
    res = validate_tail_mc(A20, np.eye(20), 2, 4, "Tr", 1.0, 1.0, trials=1000, seed=4)
    assert res.predicted_failure_prob >= 1 and res.passed


def test_validate_tail_ideal_no_exceedance():
    K = np.diag(np.r_[np.ones(5), np.zeros(15)])
    res = validate_tail_mc(A20, K, 5, 5, "op", 2.0, 2.0, trials=1000, seed=5)
    assert res.empirical_rate == 0.0 and res.passed


def test_bounds_report_rows():
    rows = bounds_report(A20, np.eye(20), 5, 5, trials=1000, seed=0)
    assert len(rows) == 6
    assert all(r["pass"] for r in rows)
    assert set(rows[0]) == {"norm", "k", "p", "t", "u", "mean_err", "stderr", "bound",
                            "empirical_rate", "predicted_rate", "pass"}
