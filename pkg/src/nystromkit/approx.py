"""Nystrom and randomized SVD low-rank approximations.

``nystrom_plain`` evaluates ``A Om (Om^T A Om)^+ Om^T A`` directly.
``nystrom_stabilized`` is the shifted Cholesky variant meant for operators
given only through their action: orthonormalize the sketch, apply the
operator, shift by ``eps * ||Y||_F``, factor, and remove the shift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np
import scipy.linalg

from .errors import ShapeMismatch
from .linalg import (EPS, PINV_RTOL, NormLike, as_array, as_norm, as_spsd, chol_spd, orth,
                     pinv, schatten_norm, symmetrize, sym_schatten_norm, _norm_from_values)


@dataclass(frozen=True)
class LowRankFactorization:
    """``U_hat @ diag(sigma_hat) @ U_hat.T`` with orthonormal ``U_hat``.

    ``shift_nu`` records the stabilizing shift (0 for the plain formula).
    """

    U_hat: np.ndarray
    sigma_hat: np.ndarray
    shift_nu: float = 0.0

    @property
    def r(self) -> int:
        return self.sigma_hat.shape[0]

    @property
    def n(self) -> int:
        return self.U_hat.shape[0]

    @classmethod
    def zero(cls, n: int) -> "LowRankFactorization":
        return cls(np.zeros((n, 0)), np.zeros(0))

    def to_dense(self) -> np.ndarray:
        return (self.U_hat * self.sigma_hat) @ self.U_hat.T

    def truncate(self, r: int) -> "LowRankFactorization":
        return LowRankFactorization(self.U_hat[:, :r], self.sigma_hat[:r], self.shift_nu)


def _from_factor(F: np.ndarray, shift: float = 0.0) -> LowRankFactorization:
    """Factorization of ``F F^T`` (or of ``F F^T - shift I`` clamped at 0)."""
    if F.shape[1] == 0:
        return LowRankFactorization.zero(F.shape[0])
    U, s, _ = np.linalg.svd(F, full_matrices=False)
    lam = np.maximum(s**2 - shift, 0.0)
    return LowRankFactorization(U, lam, shift)


def nystrom_plain(A, Omega: np.ndarray, rtol: float = PINV_RTOL) -> LowRankFactorization:
    """Nystrom approximation ``A Om (Om^T A Om)^+ Om^T A`` in factored form.

    The core matrix is pseudo-inverted by eigenvalue truncation at
    ``rtol`` relative to its largest eigenvalue.
    """
    A = as_array(A)
    Omega = np.asarray(Omega, dtype=float)
    if Omega.ndim != 2 or Omega.shape[0] != A.shape[0]:
        raise ShapeMismatch(f"sketch shape {Omega.shape} incompatible with A {A.shape}")
    Y = A @ Omega
    c, V = np.linalg.eigh(symmetrize(Omega.T @ Y))
    top = np.max(np.abs(c)) if c.size else 0.0
    if top <= 0:
        return LowRankFactorization.zero(A.shape[0])
    keep = c > rtol * top
    F = Y @ (V[:, keep] / np.sqrt(c[keep]))
    return _from_factor(F)


def shift_value(Y: np.ndarray, eps_machine: float = EPS) -> float:
    return float(eps_machine * np.linalg.norm(Y))


Operator = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def nystrom_stabilized(A_apply: Operator, Omega: np.ndarray, eps_machine: float = EPS) -> LowRankFactorization:
    """Shifted, orthonormalized Nystrom approximation.

    ``A_apply`` is a matrix or a callable returning ``A @ X``. Steps:
    ``Q = orth(Omega)``, ``Y = A Q``, ``nu = eps ||Y||_F``, ``Y_nu = Y + nu Q``,
    ``R^T R = sym(Q^T Y_nu)``, ``B = Y_nu R^{-1}``, ``B = U S V^T`` and
    ``sigma_hat = max(S^2 - nu, 0)``.

    Raises NotPositiveDefinite if the Cholesky step fails even with jitter.
    """
    apply = A_apply if callable(A_apply) else as_array(A_apply).__matmul__
    Omega = np.asarray(Omega, dtype=float)
    Q = orth(Omega)
    if Q.shape[1] == 0:
        return LowRankFactorization.zero(Omega.shape[0])
    Y = apply(Q)
    nu = shift_value(Y, eps_machine)
    Y_nu = Y + nu * Q
    R = chol_spd(symmetrize(Q.T @ Y_nu))
    B = scipy.linalg.solve_triangular(R, Y_nu.T, trans="T", lower=False).T
    return _from_factor(B, nu)


class RsvdResult(NamedTuple):
    """Orthonormal range basis ``Q`` and the projected matrix ``Q^T B``."""

    Q: np.ndarray
    QtB: np.ndarray

    def to_dense(self) -> np.ndarray:
        return self.Q @ self.QtB

    def error(self, B, norm: NormLike) -> float:
        return schatten_norm(as_array(B) - self.to_dense(), norm)


def randomized_svd(B, Omega: np.ndarray) -> RsvdResult:
    """Basic randomized range finder: ``Q = orth(B Omega)`` and ``Q Q^T B``."""
    B = as_array(B)
    Omega = np.asarray(Omega, dtype=float)
    if Omega.shape[0] != B.shape[1]:
        raise ShapeMismatch(f"sketch has {Omega.shape[0]} rows, B has {B.shape[1]} columns")
    Q = orth(B @ Omega)
    return RsvdResult(Q, Q.T @ B)


def approx_error(A, F: LowRankFactorization, norm: NormLike) -> float:
    """``||A - U_hat diag(sigma_hat) U_hat^T||`` from the residual's |eigenvalues|."""
    A = as_array(A)
    if F.n != A.shape[0]:
        raise ShapeMismatch(f"factorization dimension {F.n} != {A.shape[0]}")
    return sym_schatten_norm(A - F.to_dense(), norm)


def optimal_error(A, k: int, norm: NormLike) -> float:
    """Best rank-k approximation error: the norm of the trailing eigenvalues."""
    lam = as_spsd(A, check=False).eig.eigenvalues
    if not 0 <= k <= lam.size:
        raise ValueError(f"k must lie in [0, {lam.size}]")
    return _norm_from_values(np.abs(lam[k:]), as_norm(norm))


def structural_bound(A, Omega: np.ndarray, k: int, norm: NormLike) -> float:
    """Deterministic per-draw bound ``||Sigma2|| + ||(S2 Om2 Om1^+)^T S2 Om2 Om1^+||``.

    Here ``S2 = Sigma2^{1/2}`` and ``Om_i = U_i^T Omega``; ``Omega1`` must
    have full row rank for the right inverse to exist.
    """
    A = as_spsd(A, check=False)
    lam, V = A.eig
    rotated = V.T @ np.asarray(Omega, dtype=float)
    Om1, Om2 = rotated[:k], rotated[k:]
    s2 = np.sqrt(np.clip(lam[k:], 0.0, None))
    M = (s2[:, None] * Om2) @ pinv(Om1)
    norm = as_norm(norm)
    return _norm_from_values(np.abs(lam[k:]), norm) + schatten_norm(M.T @ M, norm)
