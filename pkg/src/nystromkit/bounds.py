"""Quality factors, error bounds and their Monte Carlo audits.

How well a sketch covariance ``K`` suits a matrix ``A`` is summarized by
two numbers per norm:

* ``beta``: the energy of the conditional covariance ``K22.1`` in the
  trailing eigenspace of A (weighted by ``Sigma2``), times ``||K11^{-1}||_2``;
* ``delta``: the misalignment term ``K21 K11^{-2} K21^T`` weighted by ``Sigma2``.

Both are normalized by ``||Sigma2||``. For ``K = I`` they are 1 and 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._parallel import pmap
from .approx import approx_error, nystrom_plain, nystrom_stabilized
from .errors import InvalidOversampling, InvalidRank, InvalidTrials, ZeroTail
from .gaussmoments import wilson_stderr
from .linalg import FRO, NUC, OP, NormLike, SchattenNorm, _norm_from_values, as_norm, as_spsd
from .sketch import PartitionedCovariance, as_covariance, draw_sketch, partition_covariance

NORM_KEYS = ("op", "F", "Tr")
_KEY_OF = {OP: "op", FRO: "F", NUC: "Tr"}
ROUNDOFF_RTOL = 1e-9


def _key(norm: NormLike) -> str:
    norm = as_norm(norm)
    if norm not in _KEY_OF:
        raise ValueError(f"bounds are available for op, F and Tr norms only, not {norm}")
    return _KEY_OF[norm]


def _psd_norm(M: np.ndarray, norm: SchattenNorm) -> float:
    if M.size == 0:
        return 0.0
    return _norm_from_values(np.abs(np.linalg.eigvalsh(M)), norm)


def sigma2_norms(sigma2) -> dict[str, float]:
    """``{op, F, Tr}`` norms of the trailing eigenvalues."""
    s = np.abs(np.asarray(sigma2, dtype=float))
    return {_KEY_OF[n]: _norm_from_values(s, n) for n in (OP, FRO, NUC)}


@dataclass(frozen=True)
class QualityFactors:
    beta: dict
    delta: dict
    inv_K11_opnorm: float
    k: int


def quality_factors(pc: PartitionedCovariance, sigma2) -> QualityFactors:
    """Evaluate ``beta`` and ``delta`` in the op, F and Tr norms.

    ``sigma2`` are the trailing eigenvalues ``sigma_{k+1} >= ... >= sigma_n``.
    Raises ZeroTail when they are all zero.
    """
    s2 = np.clip(np.asarray(sigma2, dtype=float), 0.0, None)
    if s2.size == 0 or not np.any(s2 > 0):
        raise ZeroTail("trailing eigenvalues vanish; rank(A) <= k")
    root = np.sqrt(s2)
    weighted_schur = root[:, None] * pc.K22_1 * root[None, :]
    T = root[:, None] * pc.tangent
    misalign = T @ T.T
    beta, delta = {}, {}
    for norm in (OP, FRO, NUC):
        key = _KEY_OF[norm]
        denom = _norm_from_values(s2, norm)
        beta[key] = _psd_norm(weighted_schur, norm) / denom * pc.inv_K11_opnorm
        delta[key] = _psd_norm(misalign, norm) / denom
    return QualityFactors(beta, delta, pc.inv_K11_opnorm, pc.k)


def quality_factors_for(A, cov, k: int) -> tuple[QualityFactors, dict[str, float]]:
    """Quality factors and ``||Sigma2||`` norms of a matrix/covariance pair."""
    A = as_spsd(A, check=False)
    pc = partition_covariance(as_covariance(cov), A.eig, k)
    sigma2 = A.eig.eigenvalues[k:]
    return quality_factors(pc, sigma2), sigma2_norms(sigma2)


@dataclass(frozen=True)
class BoundConstants:
    """Constants of the Frobenius expectation bound (c1, c2) and of the tail bounds (d1, d2, d3).

    They are defined for ``p >= 4``; the spectral and nuclear expectation
    bounds only use ``k`` and ``p`` and hold for ``p >= 2``.
    """

    k: int
    p: int

    def _need_p4(self):
        if self.p < 4:
            raise InvalidOversampling(f"constant requires p >= 4, got p={self.p}")

    @property
    def c1(self) -> float:
        self._need_p4()
        k, p = self.k, self.p
        return k * ((p - 1) * (k + 1) + 2) / (p * (p - 1) * (p - 3))

    @property
    def c2(self) -> float:
        self._need_p4()
        k, p = self.k, self.p
        return k * (k + p - 1) / (p * (p - 1) * (p - 3))

    @property
    def d1(self) -> float:
        self._need_p4()
        return 3 * self.k / (self.p + 1)

    @property
    def d2(self) -> float:
        self._need_p4()
        return math.e**2 * (self.k + self.p) / (self.p + 1) ** 2

    @property
    def d3(self) -> float:
        return math.sqrt(self.k) * self.d2


def bound_constants(k: int, p: int) -> BoundConstants:
    if p < 4:
        raise InvalidOversampling(f"bound constants need p >= 4, got p={p}")
    if k < 1:
        raise InvalidRank(f"k must be >= 1, got {k}")
    return BoundConstants(k, p)


def _check_hypotheses(norm_key: str, k: int, p: int, tail: bool):
    if k < 2:
        raise InvalidRank(f"the bounds assume k >= 2, got k={k}")
    need = 4 if (tail or norm_key == "F") else 2
    if p < need:
        raise InvalidOversampling(f"{'tail' if tail else 'expectation'} bound in the "
                                  f"{norm_key} norm needs p >= {need}, got p={p}")


def expected_bound(norm: NormLike, qf: QualityFactors, consts: BoundConstants, sigma2_norms: dict) -> float:
    """Right-hand side of the expectation bound on ``E||A - A_hat||``."""
    key = _key(norm)
    k, p = consts.k, consts.p
    _check_hypotheses(key, k, p, tail=False)
    b, d, s = qf.beta, qf.delta, sigma2_norms
    if key == "op":
        return ((1 + 3 * k / (p - 1) * b["op"] + 3 * d["op"]) * s["op"]
                + 3 * math.e**2 * (k + p) / (p * p - 1) * b["Tr"] * s["Tr"])
    if key == "Tr":
        return (1 + k / (p - 1) * b["Tr"] + d["Tr"]) * s["Tr"]
    return ((1 + 2 * d["F"] + 2 * math.sqrt(consts.c1) * b["F"]) * s["F"]
            + 2 * math.sqrt(consts.c2) * b["Tr"] * s["Tr"])


def tail_bound(norm: NormLike, qf: QualityFactors, consts: BoundConstants, sigma2_norms: dict,
               t: float, u: float) -> tuple[float, float]:
    """Deviation bound ``(rhs, failure_prob)``: ``||A - A_hat|| <= rhs`` except with probability ``failure_prob``.

    ``failure_prob`` is ``2 t^-p + exp(-u^2/2)`` (op, Tr) or
    ``3 t^-p + exp(-u^2/2)`` (F).
    """
    if t < 1 or u < 1:
        raise ValueError("t and u must be >= 1")
    key = _key(norm)
    k, p = consts.k, consts.p
    _check_hypotheses(key, k, p, tail=True)
    b, d, s = qf.beta, qf.delta, sigma2_norms
    d1, d2, d3 = consts.d1, consts.d2, consts.d3
    t2, u2 = t * t, u * u
    gauss = math.exp(-u2 / 2)
    if key == "op":
        rhs = (1 + 4 * d["op"] + 4 * (d1 + d2 * u2) * t2 * b["op"]) * s["op"] + 4 * d2 * t2 * b["Tr"] * s["Tr"]
        return rhs, 2 * t ** -p + gauss
    if key == "Tr":
        rhs = (1 + 2 * d["Tr"] + d1 * t2 * b["Tr"]) * s["Tr"] + 2 * d2 * t2 * u2 * b["op"] * s["op"]
        return rhs, 2 * t ** -p + gauss
    rhs = (s["F"] + 4 * (d["F"] + t2 * (d1 + d3) * b["F"]) * s["F"] + 4 * t2 * d3 * b["Tr"] * s["Tr"]
           + 2 * t2 * u2 * d2 * b["op"] * s["op"])
    return rhs, 3 * t ** -p + gauss


def rsvd_expected_frob_bound(which: str, B, K, k: int, p: int) -> float:
    """Bound on ``E||B - Q Q^T B||_F^2`` for the randomized SVD with N(0, K) sketches.

    ``which="ours"`` uses the Schur complement ``K22.1`` and the misalignment
    term; ``which="prior"`` is the older bound built on ``K22``.
    """
    if p < 2:
        raise InvalidOversampling("the randomized SVD bound needs p >= 2")
    B = np.asarray(B, dtype=float)
    # full right singular basis of B from B^T B, so U2 spans the whole complement
    lam, V = np.linalg.eigh(B.T @ B)
    order = np.argsort(lam)[::-1]
    V = V[:, order]
    s = np.sqrt(np.clip(lam[order], 0.0, None))
    Kt = V.T @ np.asarray(K, dtype=float) @ V
    K11, K21, K22 = Kt[:k, :k], Kt[k:, :k], Kt[k:, k:]
    K11_inv = np.linalg.inv(K11)
    inv_norm = float(np.linalg.eigvalsh(K11_inv)[-1])
    s2sq = s[k:] ** 2
    tail = float(s2sq.sum())
    if tail == 0:
        return 0.0
    if which == "ours":
        schur = K22 - K21 @ K11_inv @ K21.T
        beta = float(np.sum(s2sq * np.diag(schur))) * inv_norm / tail
        delta = float(np.sum(s2sq * np.diag(K21 @ K11_inv @ K11_inv @ K21.T))) / tail
        return (1 + k / (p - 1) * beta + delta) * tail
    if which == "prior":
        gamma = float(np.sum(s2sq * np.diag(K22))) * inv_norm / tail
        return (1 + k * (k + p) / (p - 1) * gamma) * tail
    raise ValueError(f"which must be 'ours' or 'prior', not {which!r}")


# -- Monte Carlo audits -----------------------------------------------------------

def sample_errors(A, cov, k: int, p: int, norms, trials: int, seed: int, algo: str = "plain") -> np.ndarray:
    """``trials x len(norms)`` array of Nystrom errors; trial ``i`` uses stream ``i``."""
    A = as_spsd(A, check=False)
    cov = as_covariance(cov)
    norms = [as_norm(n) for n in norms]
    approx = nystrom_plain if algo == "plain" else nystrom_stabilized

    def one(i):
        F = approx(A.entries, draw_sketch(cov, k + p, seed, stream=i))
        resid = np.abs(np.linalg.eigvalsh(A.entries - F.to_dense()))
        return [_norm_from_values(resid, n) for n in norms]

    return np.array(pmap(one, range(trials)), dtype=float).reshape(trials, len(norms))


class ExpectationCheck(NamedTuple):
    mean_err: float
    stderr: float
    bound: float
    passed: bool


class TailCheck(NamedTuple):
    empirical_rate: float
    predicted_failure_prob: float
    stderr: float
    passed: bool


def _bound_inputs(A, cov, k, p):
    qf, s2n = quality_factors_for(A, cov, k)
    return qf, s2n, BoundConstants(k, p)


def expectation_check(errors: np.ndarray, bound: float) -> ExpectationCheck:
    mean = float(errors.mean())
    se = float(errors.std(ddof=1) / math.sqrt(errors.size))
    slack = ROUNDOFF_RTOL * abs(bound)
    return ExpectationCheck(mean, se, bound, mean - 3 * se <= bound + slack)


def tail_check(errors: np.ndarray, rhs: float, prob: float) -> TailCheck:
    hits = int(np.sum(errors > rhs * (1 + ROUNDOFF_RTOL)))
    rate = hits / errors.size
    se = wilson_stderr(hits, errors.size)
    passed = prob >= 1 or rate <= prob + 3 * se
    return TailCheck(rate, prob, se, passed)


def validate_expectation_mc(A, cov, k: int, p: int, norm: NormLike, trials: int, seed: int) -> ExpectationCheck:
    """Sample-mean Nystrom error against the expectation bound.

    Passes when ``mean - 3 stderr <= bound``.
    """
    if trials < 100:
        raise InvalidTrials(f"need at least 100 trials, got {trials}")
    qf, s2n, consts = _bound_inputs(A, cov, k, p)
    bound = expected_bound(norm, qf, consts, s2n)
    errs = sample_errors(A, cov, k, p, [norm], trials, seed)[:, 0]
    return expectation_check(errs, bound)


def validate_tail_mc(A, cov, k: int, p: int, norm: NormLike, t: float, u: float,
                     trials: int, seed: int) -> TailCheck:
    """Empirical exceedance rate of the tail bound.

    Passes when the rate is at most the predicted failure probability plus
    three binomial (Wilson) standard errors; a vacuous prediction (>= 1)
    passes by definition.
    """
    if trials < 1000:
        raise InvalidTrials(f"need at least 1000 trials, got {trials}")
    qf, s2n, consts = _bound_inputs(A, cov, k, p)
    rhs, prob = tail_bound(norm, qf, consts, s2n, t, u)
    errs = sample_errors(A, cov, k, p, [norm], trials, seed)[:, 0]
    return tail_check(errs, rhs, prob)


REPORT_FIELDS = ("norm", "k", "p", "t", "u", "mean_err", "stderr", "bound",
                 "empirical_rate", "predicted_rate", "pass")


def bounds_report(A, cov, k: int, p: int, norms=("op", "F", "Tr"), tu=((2.0, 3.0), (3.0, 2.0)),
                  trials: int = 2000, seed: int = 0) -> list[dict]:
    """One row per (norm, t, u) combining the expectation and tail audits."""
    if trials < 1000:
        raise InvalidTrials(f"need at least 1000 trials, got {trials}")
    norms = [as_norm(n) for n in norms]
    qf, s2n, consts = _bound_inputs(A, cov, k, p)
    errs = sample_errors(A, cov, k, p, norms, trials, seed)
    rows = []
    for j, norm in enumerate(norms):
        exp = expectation_check(errs[:, j], expected_bound(norm, qf, consts, s2n))
        for t, u in tu:
            rhs, prob = tail_bound(norm, qf, consts, s2n, t, u)
            tail = tail_check(errs[:, j], rhs, prob)
            rows.append({
                "norm": _key(norm), "k": k, "p": p, "t": t, "u": u,
                "mean_err": exp.mean_err, "stderr": exp.stderr, "bound": exp.bound,
                "empirical_rate": tail.empirical_rate, "predicted_rate": tail.predicted_failure_prob,
                "pass": exp.passed and tail.passed,
            })
    return rows
