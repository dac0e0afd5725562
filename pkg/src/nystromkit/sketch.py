"""Correlated Gaussian test matrices and the partitioned sketch covariance.

Columns of a sketch are i.i.d. ``N(0, K)``. Relative to the eigenvectors
``U = [U1 U2]`` of the target matrix, the rotated covariance ``U^T K U``
splits into the blocks ``K11, K21, K22``; the Schur complement
``K22.1 = K22 - K21 K11^{-1} K21^T`` is the conditional covariance of
``U2^T omega`` given ``U1^T omega``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import InvalidRank, ShapeMismatch, SingularK11
from .linalg import EPS, EigenDecomposition, SpsdMatrix, as_spsd, psd_sqrt, symmetrize

K11_RTOL = 1e-12
_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(seed, stream)``.

    Trial ``i`` of a Monte Carlo run uses ``stream=i``, so results do not
    depend on the order in which trials are executed.
    """
    ss = np.random.SeedSequence([int(seed) & _SEED_MASK, int(stream) & _SEED_MASK])
    return np.random.Generator(np.random.Philox(ss))


class CovarianceSpec:
    """Sketch covariance ``K`` with its PSD square root (computed once)."""

    def __init__(self, K, *, identity: bool = False):
        self.K = as_spsd(K)
        self._identity = identity

    @classmethod
    def identity(cls, n: int) -> "CovarianceSpec":
        return cls(SpsdMatrix(np.eye(n), check=False), identity=True)

    @property
    def dim(self) -> int:
        return self.K.dim

    @property
    def is_identity(self) -> bool:
        return self._identity

    @cached_property
    def sqrt_K(self) -> np.ndarray:
        """PSD square root with eigenvalues below ``n * eps * lambda_max`` set to zero.

        Those eigenvalues are indistinguishable from rounding error in ``K``;
        keeping them would inject ``sqrt(eps)``-sized noise directions into
        every sketch.
        """
        if self._identity:
            return np.eye(self.dim)
        psd_sqrt(self.K)  # raises NotPsd on clearly negative eigenvalues
        lam, V = self.K.eig
        r = self.rank_estimate
        return symmetrize((V[:, :r] * np.sqrt(lam[:r])) @ V[:, :r].T)

    @cached_property
    def rank_estimate(self) -> int:
        lam = self.K.eig.eigenvalues
        if lam.size == 0 or lam[0] <= 0:
            return 0
        return int(np.sum(lam > self.dim * EPS * lam[0]))

    def __repr__(self):
        return f"CovarianceSpec(dim={self.dim}, identity={self._identity})"


def as_covariance(cov) -> CovarianceSpec:
    return cov if isinstance(cov, CovarianceSpec) else CovarianceSpec(cov)


def draw_sketch(cov, cols: int, seed: int, stream: int = 0) -> np.ndarray:
    """Draw an ``n x cols`` matrix with i.i.d. ``N(0, K)`` columns.

    The same ``(seed, stream)`` always yields the same matrix.
    """
    if cols < 1:
        raise ValueError("cols must be >= 1")
    cov = as_covariance(cov)
    X = make_rng(seed, stream).standard_normal((cov.dim, cols))
    if cov.is_identity:
        return X
    return cov.sqrt_K @ X


@dataclass(frozen=True)
class SketchDraw:
    Omega: np.ndarray
    Omega1: np.ndarray
    Omega2: np.ndarray
    seed: int | None = None


def split_sketch(Omega: np.ndarray, eig_A: EigenDecomposition, k: int, seed: int | None = None) -> SketchDraw:
    """Rotate a sketch into the eigenbasis of A: ``Omega1 = U1^T Omega``, ``Omega2 = U2^T Omega``."""
    V = eig_A.eigenvectors
    if Omega.shape[0] != V.shape[0]:
        raise ShapeMismatch(f"sketch has {Omega.shape[0]} rows, A has dimension {V.shape[0]}")
    rotated = V.T @ Omega
    return SketchDraw(Omega, rotated[:k], rotated[k:], seed)


@dataclass(frozen=True)
class PartitionedCovariance:
    """Blocks of ``U^T K U`` split at the target rank ``k``."""

    k: int
    K11: np.ndarray
    K21: np.ndarray
    K22: np.ndarray
    K22_1: np.ndarray
    inv_K11_opnorm: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def tangent(self) -> np.ndarray:
        """``K21 @ inv(K11)``, obtained with a symmetric solve."""
        if "tangent" not in self._cache:
            if self.K21.size == 0:
                self._cache["tangent"] = np.zeros_like(self.K21)
            else:
                self._cache["tangent"] = scipy.linalg.solve(
                    self.K11, self.K21.T, assume_a="sym").T
        return self._cache["tangent"]

    def assemble(self) -> np.ndarray:
        return np.block([[self.K11, self.K21.T], [self.K21, self.K22]])


def partition_covariance(cov, eig_A: EigenDecomposition, k: int) -> PartitionedCovariance:
    """Partition ``U^T K U`` at rank ``k`` and form the Schur complement.

    Raises SingularK11 when ``lambda_min(K11) <= 1e-12 * ||K11||_2``.
    """
    cov = as_covariance(cov)
    V = eig_A.eigenvectors
    n = V.shape[0]
    if cov.dim != n:
        raise ShapeMismatch(f"covariance dim {cov.dim} != matrix dim {n}")
    if not 1 <= k < n:
        raise InvalidRank(f"need 1 <= k < n, got k={k}, n={n}")
    if cov.is_identity:
        Kt = np.eye(n)
    else:
        Kt = symmetrize(V.T @ cov.K.entries @ V)
    K11 = Kt[:k, :k]
    K21 = Kt[k:, :k]
    K22 = Kt[k:, k:]
    lam11 = np.linalg.eigvalsh(K11)
    if lam11[-1] <= 0 or lam11[0] <= K11_RTOL * lam11[-1]:
        raise SingularK11(f"K11 is numerically singular: eigenvalues in "
                          f"[{lam11[0]:.3e}, {lam11[-1]:.3e}]")
    tangent = scipy.linalg.solve(K11, K21.T, assume_a="sym").T
    schur = symmetrize(K22 - tangent @ K21.T)
    mu, W = np.linalg.eigh(schur)
    schur = symmetrize((W * np.clip(mu, 0.0, None)) @ W.T)
    pc = PartitionedCovariance(k, K11, K21, K22, schur, float(1.0 / lam11[0]))
    pc._cache["tangent"] = tangent
    return pc


def conditional_draw_params(pc: PartitionedCovariance, Omega1: np.ndarray):
    """Mean and covariance square root of ``Omega2 | Omega1``.

    Returns ``(K21 K11^{-1} Omega1, K22.1^{1/2})``.
    """
    if Omega1.shape[0] != pc.k:
        raise ShapeMismatch(f"Omega1 must have {pc.k} rows, got {Omega1.shape[0]}")
    mean = pc.tangent @ Omega1
    cov_sqrt = psd_sqrt(SpsdMatrix(pc.K22_1, check=False)).entries
    return mean, cov_sqrt


def conditional_resample(pc: PartitionedCovariance, Omega1: np.ndarray, rng: np.random.Generator,
                         params=None) -> np.ndarray:
    """Draw ``Omega2`` from its conditional distribution given ``Omega1``."""
    mean, cov_sqrt = params if params is not None else conditional_draw_params(pc, Omega1)
    return mean + cov_sqrt @ rng.standard_normal(mean.shape)
