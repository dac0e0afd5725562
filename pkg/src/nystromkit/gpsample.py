"""Gaussian-process sampling from a low-rank kernel factorization.

Samples live in the weighted grid coordinates of a :class:`KernelOperator`,
so squared Euclidean norms approximate squared L2 norms on the domain;
``KernelOperator.to_grid`` converts them to function values at the nodes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .approx import LowRankFactorization
from .errors import ShapeMismatch
from .linalg import as_array, psd_sqrt, symmetrize
from .sketch import make_rng

RESIDUAL_PSD_RTOL = 1e-8
_CHUNK = 2000


@dataclass(frozen=True)
class GpSampleBatch:
    """``samples[:, j] = U_hat diag(sqrt(sigma_hat)) z_j`` with ``z_j ~ N(0, I_r)``."""

    samples: np.ndarray
    rank_used: int
    seed: int

    @property
    def batch(self) -> int:
        return self.samples.shape[1]


def sample_gp(F: LowRankFactorization, batch: int, seed: int) -> GpSampleBatch:
    """Draw ``batch`` realizations with covariance ``U_hat diag(sigma_hat) U_hat^T``."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    r = F.r
    if r == 0:
        return GpSampleBatch(np.zeros((F.n, batch)), 0, seed)
    Z = make_rng(seed, 0).standard_normal((r, batch))
    return GpSampleBatch((F.U_hat * np.sqrt(F.sigma_hat)) @ Z, r, seed)


def wasserstein_trace_check(A, F: LowRankFactorization) -> float:
    """Trace norm of the residual ``A - U_hat diag(sigma_hat) U_hat^T``.

    For a Nystrom factorization the residual is PSD and its trace norm is
    ``trace(A) - sum(sigma_hat)``. If the residual has an eigenvalue below
    ``-1e-8 ||A||_2`` the sum of absolute eigenvalues is returned instead
    and a ``RuntimeWarning`` is issued.
    """
    A = as_array(getattr(A, "A", A))
    if F.n != A.shape[0]:
        raise ShapeMismatch(f"factorization dimension {F.n} != {A.shape[0]}")
    resid = np.linalg.eigvalsh(symmetrize(A - F.to_dense()))
    scale = max(float(np.max(np.abs(np.linalg.eigvalsh(A)))), 0.0) if A.size else 0.0
    if resid.size and resid[0] < -RESIDUAL_PSD_RTOL * scale:
        warnings.warn(f"residual is not PSD (min eigenvalue {resid[0]:.3e}); "
                      "reporting the absolute-eigenvalue sum", RuntimeWarning, stacklevel=2)
        return float(np.sum(np.abs(resid)))
    return float(np.trace(A) - np.sum(F.sigma_hat))


def coupled_mse(A, F: LowRankFactorization, batch: int, seed: int) -> tuple[float, float]:
    """Empirical ``E||omega - omega_hat||^2`` under the eigenbasis coupling.

    With ``A = U Lam U^T`` both processes are driven by one standard normal
    vector ``g = U zeta``: ``omega = A^{1/2} g`` and
    ``omega_hat = U_hat diag(sqrt(sigma_hat)) U_hat^T g``. Returns the sample
    mean and its standard error.
    """
    A = as_array(getattr(A, "A", A))
    if batch < 2:
        raise ValueError("batch must be >= 2 to estimate a standard error")
    D = psd_sqrt(A).entries - (F.U_hat * np.sqrt(F.sigma_hat)) @ F.U_hat.T
    rng = make_rng(seed, 0)
    sq = np.empty(batch)
    for start in range(0, batch, _CHUNK):
        m = min(_CHUNK, batch - start)
        G = rng.standard_normal((A.shape[0], m))
        sq[start:start + m] = np.sum((D @ G) ** 2, axis=0)
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(batch))


def sample_covariance(samples: np.ndarray) -> np.ndarray:
    """Zero-mean empirical covariance ``S S^T / batch``."""
    return samples @ samples.T / samples.shape[1]
