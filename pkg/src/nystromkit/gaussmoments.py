"""Moments and tails of Gaussian matrices, in closed form and by Monte Carlo.

Two families are covered:

* shifted/scaled Gaussian matrices ``B + C Psi D`` with ``Psi`` standard
  normal, and
* pseudo-inverses of ``Omega1 = K11^{1/2} X`` (``X`` standard normal,
  ``k x (k+p)``), whose Gram matrix ``Omega1 Omega1^T`` is Wishart.

Each closed form has a vectorized sampler so ``mc_validate`` can compare
the two. Expectation formulas need ``trials >= 10**4``; tail probabilities
need ``trials >= 10**3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidOversampling, InvalidRank, InvalidTrials, ShapeMismatch, SingularK11
from .linalg import FRO, OP, SchattenNorm, as_norm, psd_sqrt, schatten_norm, singular_values
from .sketch import make_rng

SHIFTED = ("frob2", "schatten4_4", "spectral2_ub", "frob4")
WISHART = ("frob2_with_B", "spectral2_ub", "schatten4_4", "frob4")
TAILS = ("frob", "spectral", "schatten4")

# formulas that are upper bounds rather than identities
_INEQUALITIES = {"shifted:spectral2_ub", "wishart:spectral2_ub"}

MIN_TRIALS_MOMENT = 10_000
MIN_TRIALS_TAIL = 1_000
_CHUNK_ENTRIES = 2_000_000


def _s4_4(M) -> float:
    """Fourth power of the Schatten-4 norm."""
    sv = singular_values(M)
    return float(np.sum(sv**4))


def shifted_gaussian_moment(which: str, C, D, B=None) -> float:
    """Closed-form moments of ``B + C Psi D`` for a standard Gaussian ``Psi``.

    ``frob2``        E||B + C Psi D||_F^2
    ``schatten4_4``  E||C Psi D||_(4)^4
    ``spectral2_ub`` upper bound on E||C Psi D||_2^2
    ``frob4``        E||C Psi D||_F^4
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    c_f2 = schatten_norm(C, FRO) ** 2
    d_f2 = schatten_norm(D, FRO) ** 2
    if which == "frob2":
        if B is None:
            b_f2 = 0.0
        else:
            B = np.atleast_2d(np.asarray(B, dtype=float))
            if B.shape != (C.shape[0], D.shape[1]):
                raise ShapeMismatch(f"B must be {C.shape[0]}x{D.shape[1]}, got {B.shape}")
            b_f2 = schatten_norm(B, FRO) ** 2
        return b_f2 + c_f2 * d_f2
    if which == "schatten4_4":
        c4, d4 = _s4_4(C), _s4_4(D)
        return c4 * d4 + c_f2**2 * d4 + c4 * d_f2**2
    if which == "spectral2_ub":
        return (math.sqrt(c_f2) * schatten_norm(D, OP) + schatten_norm(C, OP) * math.sqrt(d_f2)) ** 2
    if which == "frob4":
        return 2.0 * _s4_4(C) * _s4_4(D) + c_f2**2 * d_f2**2
    raise ValueError(f"unknown shifted-Gaussian formula {which!r}")


def _inv_k11(K11, k: int) -> np.ndarray:
    K11 = np.atleast_2d(np.asarray(K11, dtype=float))
    if K11.shape != (k, k):
        raise ShapeMismatch(f"K11 must be {k}x{k}, got {K11.shape}")
    lam = np.linalg.eigvalsh(K11)
    if lam[-1] <= 0 or lam[0] <= 1e-12 * lam[-1]:
        raise SingularK11("K11 is numerically singular")
    return np.linalg.inv(K11)


def pinv_wishart_moment(which: str, K11, k: int, p: int, B=None) -> float:
    """Closed-form moments of ``Omega1^+`` where ``Omega1`` has i.i.d. N(0, K11) columns.

    ``frob2_with_B`` E||Omega1^+ B||_F^2 (``B`` defaults to the identity), p >= 2
    ``spectral2_ub`` upper bound on E||Omega1^+||_2^2, p >= 2 and k >= 2
    ``schatten4_4``  E||Omega1^+||_(4)^4, p >= 4
    ``frob4``        E||Omega1^+||_F^4, p >= 4
    """
    Kinv = _inv_k11(K11, k)
    tr = float(np.trace(Kinv))
    f2 = float(np.sum(Kinv * Kinv))
    if which == "frob2_with_B":
        if p < 2:
            raise InvalidOversampling("frob2_with_B needs p >= 2")
        Bm = np.eye(k) if B is None else np.atleast_2d(np.asarray(B, dtype=float))
        if Bm.shape[0] != k:
            raise ShapeMismatch(f"B must have {k} rows, got {Bm.shape[0]}")
        return float(np.sum((Kinv @ Bm) * Bm)) / (p - 1)
    if which == "spectral2_ub":
        if p < 2:
            raise InvalidOversampling("spectral2_ub needs p >= 2")
        if k < 2:
            raise InvalidRank("spectral2_ub needs k >= 2")
        return math.e**2 * (k + p) / ((p - 1) * (p + 1)) * float(np.linalg.eigvalsh(Kinv)[-1])
    if p < 4:
        raise InvalidOversampling(f"{which} needs p >= 4")
    denom = p * (p - 1) * (p - 3)
    if which == "schatten4_4":
        return ((p - 1) * f2 + tr**2) / denom
    if which == "frob4":
        return ((p - 2) * tr**2 + 2 * f2) / denom
    raise ValueError(f"unknown inverse-Wishart formula {which!r}")


def pinv_tail_bound(which: str, K11, k: int, p: int, t: float) -> tuple[float, float]:
    """Threshold and probability bound for ``P{||Omega1^+|| > threshold}``.

    Returns ``(threshold, prob_bound)``; ``prob_bound`` is ``t**-p`` for the
    Frobenius norm and ``t**-(p+1)`` for the spectral and Schatten-4 norms.
    """
    if p < 4:
        raise InvalidOversampling("pseudo-inverse tail bounds need p >= 4")
    if t < 1:
        raise ValueError("t must be >= 1")
    Kinv = _inv_k11(K11, k)
    if which == "frob":
        return math.sqrt(3 * np.trace(Kinv) / (p + 1)) * t, float(t ** -p)
    if which == "spectral":
        scale = float(np.linalg.eigvalsh(Kinv)[-1])
    elif which == "schatten4":
        scale = float(np.sqrt(np.sum(Kinv * Kinv)))
    else:
        raise ValueError(f"unknown tail formula {which!r}")
    return math.e * math.sqrt((k + p) * scale) / (p + 1) * t, float(t ** -(p + 1))


# -- Monte Carlo ---------------------------------------------------------------

@dataclass(frozen=True)
class MomentReport:
    formula: str
    closed_form: float
    mc_estimate: float
    mc_stderr: float
    trials: int
    kind: str  # "equality", "upper" or "tail"
    passed: bool


def wilson_stderr(hits: int, n: int) -> float:
    """One-sigma half width of the Wilson score interval for a proportion."""
    phat = hits / n
    return math.sqrt(phat * (1 - phat) / n + 1.0 / (4 * n * n)) / (1 + 1.0 / n)


def _chunks(trials: int, per_trial: int):
    size = max(1, min(trials, _CHUNK_ENTRIES // max(per_trial, 1)))
    start = 0
    idx = 0
    while start < trials:
        b = min(size, trials - start)
        yield idx, b
        start += b
        idx += 1


def sample_shifted(which: str, C, D, B, trials: int, seed: int) -> np.ndarray:
    """Per-trial samples of the quantity whose mean ``shifted_gaussian_moment`` gives."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    m2, n1 = C.shape[1], D.shape[0]
    out = []
    for idx, b in _chunks(trials, m2 * n1 + C.shape[0] * D.shape[1]):
        Psi = make_rng(seed, idx).standard_normal((b, m2, n1))
        X = C @ Psi @ D
        if which == "frob2":
            if B is not None:
                X = X + np.asarray(B, dtype=float)
            out.append(np.sum(X * X, axis=(1, 2)))
        elif which == "frob4":
            out.append(np.sum(X * X, axis=(1, 2)) ** 2)
        elif which == "schatten4_4":
            G = X.transpose(0, 2, 1) @ X if X.shape[2] <= X.shape[1] else X @ X.transpose(0, 2, 1)
            out.append(np.sum(G * G, axis=(1, 2)))
        elif which == "spectral2_ub":
            out.append(np.linalg.norm(X, 2, axis=(1, 2)) ** 2)
        else:
            raise ValueError(f"unknown shifted-Gaussian formula {which!r}")
    return np.concatenate(out)


def _wishart_inverses(K11, k: int, p: int, trials: int, seed: int):
    """Yield ``(W, inv(W))`` batches for ``W = Omega1 Omega1^T``."""
    root = psd_sqrt(np.atleast_2d(np.asarray(K11, dtype=float))).entries
    for idx, b in _chunks(trials, k * (k + p)):
        X = make_rng(seed, idx).standard_normal((b, k, k + p))
        Om1 = root @ X
        W = Om1 @ Om1.transpose(0, 2, 1)
        yield W, np.linalg.inv(W)


def sample_wishart(which: str, K11, k: int, p: int, B, trials: int, seed: int) -> np.ndarray:
    out = []
    Bm = np.eye(k) if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    for W, Winv in _wishart_inverses(K11, k, p, trials, seed):
        if which == "frob2_with_B":
            # ||Om1^+ B||_F^2 = tr(B^T (Om1 Om1^T)^{-1} B)
            out.append(np.sum((Winv @ Bm) * Bm, axis=(1, 2)))
        elif which == "spectral2_ub":
            out.append(1.0 / np.linalg.eigvalsh(W)[:, 0])
        elif which == "schatten4_4":
            out.append(np.sum(Winv * Winv, axis=(1, 2)))
        elif which == "frob4":
            out.append(np.trace(Winv, axis1=1, axis2=2) ** 2)
        else:
            raise ValueError(f"unknown inverse-Wishart formula {which!r}")
    return np.concatenate(out)


def sample_pinv_norms(which: str, K11, k: int, p: int, trials: int, seed: int) -> np.ndarray:
    """Samples of ``||Omega1^+||`` in the Frobenius, spectral or Schatten-4 norm."""
    out = []
    for W, Winv in _wishart_inverses(K11, k, p, trials, seed):
        if which == "frob":
            out.append(np.sqrt(np.trace(Winv, axis1=1, axis2=2)))
        elif which == "spectral":
            out.append(np.sqrt(1.0 / np.linalg.eigvalsh(W)[:, 0]))
        elif which == "schatten4":
            out.append(np.sum(Winv * Winv, axis=(1, 2)) ** 0.25)
        else:
            raise ValueError(f"unknown tail formula {which!r}")
    return np.concatenate(out)


def mc_validate(formula_id: str, params: dict, trials: int, seed: int) -> MomentReport:
    """Compare a closed form with its Monte Carlo estimate.

    ``formula_id`` is ``"shifted:<name>"``, ``"wishart:<name>"`` or
    ``"tail:<name>"``. ``params`` holds the matrices and integers the
    closed form needs (``B, C, D`` or ``K11, k, p, B`` or ``K11, k, p, t``).

    Identities pass when ``|closed - estimate| <= 5 stderr``; upper bounds
    and tail probabilities pass when ``estimate <= closed + 3 stderr``.
    """
    family, _, name = formula_id.partition(":")
    minimum = MIN_TRIALS_TAIL if family == "tail" else MIN_TRIALS_MOMENT
    if trials < minimum:
        raise InvalidTrials(f"{formula_id} needs at least {minimum} trials, got {trials}")
    if family == "tail":
        K11, k, p, t = params["K11"], params["k"], params["p"], params["t"]
        threshold, prob = pinv_tail_bound(name, K11, k, p, t)
        hits = int(np.sum(sample_pinv_norms(name, K11, k, p, trials, seed) > threshold))
        rate = hits / trials
        se = wilson_stderr(hits, trials)
        return MomentReport(formula_id, prob, rate, se, trials, "tail", rate <= prob + 3 * se)
    if family == "shifted":
        closed = shifted_gaussian_moment(name, params["C"], params["D"], params.get("B"))
        samples = sample_shifted(name, params["C"], params["D"], params.get("B"), trials, seed)
    elif family == "wishart":
        K11, k, p = params["K11"], params["k"], params["p"]
        closed = pinv_wishart_moment(name, K11, k, p, params.get("B"))
        samples = sample_wishart(name, K11, k, p, params.get("B"), trials, seed)
    else:
        raise ValueError(f"unknown formula family in {formula_id!r}")
    est = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(trials))
    if formula_id in _INEQUALITIES:
        return MomentReport(formula_id, closed, est, se, trials, "upper", est <= closed + 3 * se)
    return MomentReport(formula_id, closed, est, se, trials, "equality", abs(closed - est) <= 5 * se)


def concentration_check(B, C, D, norm, u: float, trials: int, seed: int):
    """Empirical ``P{||B + C Psi D|| >= mean + ||C||_2 ||D||_2 u}`` against ``exp(-u^2/2)``.

    Returns ``(rate, bound, stderr, passed)``.
    """
    norm = as_norm(norm)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    vals = []
    for idx, b in _chunks(trials, C.shape[1] * D.shape[0]):
        Psi = make_rng(seed, idx).standard_normal((b, C.shape[1], D.shape[0]))
        X = B + C @ Psi @ D
        sv = np.linalg.svd(X, compute_uv=False)
        vals.append(_batched_norm(sv, norm))
    vals = np.concatenate(vals)
    level = vals.mean() + schatten_norm(C, OP) * schatten_norm(D, OP) * u
    hits = int(np.sum(vals >= level))
    rate = hits / trials
    se = wilson_stderr(hits, trials)
    bound = math.exp(-u * u / 2)
    return rate, bound, se, rate <= bound + 3 * se


def _batched_norm(sv: np.ndarray, norm: SchattenNorm) -> np.ndarray:
    if math.isinf(norm.s):
        return sv.max(axis=1)
    return np.sum(sv**norm.s, axis=1) ** (1.0 / norm.s)


def lemma_suite(seed: int = 0, configs: int = 1):
    """Formula/parameter pairs exercising every closed form.

    Shapes and matrices are drawn from ``seed``. Inverse-Wishart moments of
    order four use ``p >= 10`` so the Monte Carlo estimator has finite variance.
    """
    rng = make_rng(seed, 10**6)
    suite = []
    for c in range(configs):
        m1, m2, n1, n2 = (int(v) for v in rng.integers(1, 5, size=4))
        C = rng.standard_normal((m1, m2))
        D = rng.standard_normal((n1, n2))
        B = rng.standard_normal((m1, n2))
        for name in SHIFTED:
            suite.append((f"shifted:{name}", {"B": B if name == "frob2" else None, "C": C, "D": D}))
        k = int(rng.integers(2, 5))
        G = rng.standard_normal((k, k))
        K11 = G @ G.T + 0.5 * np.eye(k)
        Bw = rng.standard_normal((k, int(rng.integers(1, 4))))
        p_low = int(rng.integers(5, 9))
        p_high = int(rng.integers(10, 14))
        suite.append(("wishart:frob2_with_B", {"K11": K11, "k": k, "p": p_low, "B": Bw}))
        suite.append(("wishart:spectral2_ub", {"K11": K11, "k": k, "p": p_low}))
        suite.append(("wishart:schatten4_4", {"K11": K11, "k": k, "p": p_high}))
        suite.append(("wishart:frob4", {"K11": K11, "k": k, "p": p_high}))
        for name in TAILS:
            for t in (1.25, 2.0):
                suite.append((f"tail:{name}", {"K11": K11, "k": k, "p": p_low, "t": t}))
    return suite


def run_lemma_suite(seed: int = 0, configs: int = 5, trials: int = 100_000) -> list[MomentReport]:
    """Validate every entry of :func:`lemma_suite`; entry ``i`` gets its own derived seed."""
    reports = []
    for i, (formula_id, params) in enumerate(lemma_suite(seed, configs)):
        sub_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        reports.append(mc_validate(formula_id, params, trials, sub_seed))
    return reports
