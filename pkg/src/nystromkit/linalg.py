"""Dense symmetric linear algebra used throughout the package.

Everything here works on small dense matrices (at most 4096 columns).
Eigendecompositions come from LAPACK through numpy; the rest is thin
policy on top of it: symmetrization, PSD tolerances, jittered Cholesky,
truncated pseudoinverses and Schatten norms.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np
import scipy.linalg

from .errors import NonConvergence, NotPositiveDefinite, NotPsd, ParseError, ShapeMismatch

PSD_ATOL = 1e-10
PINV_RTOL = 1e-12
MAX_COLS = 4096
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SchattenNorm:
    """Schatten s-norm selector, ``(sum sigma_i^s)^(1/s)``.

    ``s = inf`` is the operator norm, ``s = 2`` Frobenius (Hilbert-Schmidt)
    and ``s = 1`` the nuclear (trace) norm.
    """

    s: float

    def __post_init__(self):
        if not self.s >= 1:
            raise ValueError(f"Schatten index must be >= 1, got {self.s}")

    @property
    def name(self) -> str:
        if math.isinf(self.s):
            return "op"
        if self.s == 2:
            return "F"
        if self.s == 1:
            return "Tr"
        return f"S{self.s:g}"

    def __str__(self):
        return self.name


OP = SchattenNorm(math.inf)
FRO = SchattenNorm(2.0)
NUC = SchattenNorm(1.0)

_NORM_ALIASES = {
    "op": OP, "2": OP, "spec": OP, "spectral": OP, "operator": OP, "inf": OP,
    "f": FRO, "fro": FRO, "frob": FRO, "frobenius": FRO, "hs": FRO,
    "tr": NUC, "nuc": NUC, "nuclear": NUC, "*": NUC, "trace": NUC,
}

NormLike = Union[SchattenNorm, str, float, int]


def as_norm(norm: NormLike) -> SchattenNorm:
    """Coerce ``'op'``, ``'F'``, ``'Tr'``, a number or a SchattenNorm."""
    if isinstance(norm, SchattenNorm):
        return norm
    if isinstance(norm, str):
        key = norm.strip().lower()
        if key in _NORM_ALIASES:
            return _NORM_ALIASES[key]
        if key.startswith("s"):
            return SchattenNorm(float(key[1:]))
        raise ValueError(f"unknown norm {norm!r}")
    return SchattenNorm(float(norm))


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending with matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _check_cols(M: np.ndarray):
    if M.ndim == 2 and M.shape[1] > MAX_COLS:
        raise ShapeMismatch(f"at most {MAX_COLS} columns supported, got {M.shape[1]}")


class SpsdMatrix:
    """Dense symmetric positive semi-definite matrix with a cached eigendecomposition.

    The entries are symmetrized on construction, so ``A[i, j] == A[j, i]``
    holds bit-exactly. With ``check=True`` the smallest eigenvalue must be
    at least ``-PSD_ATOL * ||A||_2``.
    """

    def __init__(self, entries, check: bool = True):
        M = np.array(entries, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ShapeMismatch(f"expected a square matrix, got shape {M.shape}")
        _check_cols(M)
        if not np.all(np.isfinite(M)):
            raise ValueError("matrix has non-finite entries")
        M = symmetrize(M)
        M.setflags(write=False)
        self._entries = M
        if check:
            lam = self.eig.eigenvalues
            if lam.size and lam[-1] < -PSD_ATOL * max(abs(lam[0]), abs(lam[-1])):
                raise NotPsd(f"min eigenvalue {lam[-1]:.3e} below tolerance "
                             f"(||A||_2 = {max(abs(lam[0]), abs(lam[-1])):.3e})")

    @property
    def entries(self) -> np.ndarray:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    @cached_property
    def eig(self) -> EigenDecomposition:
        return eig_sym(self._entries)

    def norm(self, norm: NormLike) -> float:
        """Schatten norm computed from the cached spectrum."""
        return _norm_from_values(np.abs(self.eig.eigenvalues), as_norm(norm))

    def __array__(self, dtype=None, copy=None):
        return self._entries if dtype is None else self._entries.astype(dtype)

    def __repr__(self):
        return f"SpsdMatrix(dim={self.dim})"


def as_array(A) -> np.ndarray:
    if isinstance(A, SpsdMatrix):
        return A.entries
    return np.asarray(A, dtype=float)


def as_spsd(A, check: bool = True) -> SpsdMatrix:
    return A if isinstance(A, SpsdMatrix) else SpsdMatrix(A, check=check)


def eig_sym(A) -> EigenDecomposition:
    """Full symmetric eigendecomposition with eigenvalues in descending order."""
    if isinstance(A, SpsdMatrix):
        return A.eig
    M = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    try:
        lam, V = np.linalg.eigh(symmetrize(M))
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    lam = lam[::-1].copy()
    V = V[:, ::-1].copy()
    lam.setflags(write=False)
    V.setflags(write=False)
    return EigenDecomposition(lam, V)


def _norm_from_values(sv: np.ndarray, norm: SchattenNorm) -> float:
    if sv.size == 0:
        return 0.0
    if math.isinf(norm.s):
        return float(sv.max())
    if norm.s == 1:
        return float(sv.sum())
    top = sv.max()
    if top == 0:
        return 0.0
    # scale by the largest value so that sv**s cannot overflow
    return float(top * np.sum((sv / top) ** norm.s) ** (1.0 / norm.s))


def singular_values(M) -> np.ndarray:
    M = as_array(M)
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


def schatten_norm(M, norm: NormLike) -> float:
    """Schatten norm of an arbitrary dense matrix.

    Examples
    --------
    >>> schatten_norm(np.diag([3.0, 4.0]), "op"), schatten_norm(np.diag([3.0, 4.0]), "Tr")
    (4.0, 7.0)
    """
    norm = as_norm(norm)
    M = as_array(M)
    if norm.s == 2:
        return float(np.sqrt(np.sum(M * M)))
    return _norm_from_values(singular_values(M), norm)


def sym_schatten_norm(M, norm: NormLike) -> float:
    """Schatten norm of a symmetric (possibly indefinite) matrix via |eigenvalues|."""
    M = as_array(M)
    if M.size == 0:
        return 0.0
    return _norm_from_values(np.abs(np.linalg.eigvalsh(symmetrize(M))), as_norm(norm))


def psd_sqrt(A) -> SpsdMatrix:
    """Symmetric PSD square root; round-off negative eigenvalues are clamped to 0."""
    A = as_spsd(A, check=False)
    lam, V = A.eig
    scale = max(abs(lam[0]), abs(lam[-1])) if lam.size else 0.0
    if lam.size and lam[-1] < -PSD_ATOL * scale:
        raise NotPsd(f"min eigenvalue {lam[-1]:.3e} below tolerance")
    root = np.sqrt(np.clip(lam, 0.0, None))
    return SpsdMatrix((V * root) @ V.T, check=False)


def chol_spd(A, max_jitter_steps: int = 6) -> np.ndarray:
    """Upper-triangular Cholesky factor R with ``A = R.T @ R``.

    If the factorization breaks down, jitter ``10**j * eps * trace(A) / n``
    is added to the diagonal for ``j = 0, ..., max_jitter_steps``.
    """
    M = symmetrize(as_array(A))
    n = M.shape[0]
    try:
        return np.linalg.cholesky(M).T
    except np.linalg.LinAlgError:
        pass
    base = EPS * np.trace(M) / max(n, 1)
    if base > 0:
        for j in range(max_jitter_steps + 1):
            try:
                return np.linalg.cholesky(M + (10.0**j * base) * np.eye(n)).T
            except np.linalg.LinAlgError:
                continue
    raise NotPositiveDefinite(
        f"Cholesky failed after {max_jitter_steps + 1} jitter steps (trace = {np.trace(M):.3e})")


def pinv(M, rtol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse discarding singular values below ``rtol * sigma_max``."""
    M = as_array(M)
    if M.size == 0:
        return np.zeros(M.shape[::-1])
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > rtol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def orth(M, rtol: float | None = None) -> np.ndarray:
    """Orthonormal basis for range(M) by QR with column pivoting.

    Columns whose pivot ``|R_jj|`` falls below ``rtol * |R_00|`` are dropped;
    the default ``rtol`` is ``max(M.shape) * eps``.
    """
    M = as_array(M)
    m, c = M.shape
    if c == 0 or m == 0:
        return np.zeros((m, 0))
    Q, R, _ = scipy.linalg.qr(M, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return np.zeros((m, 0))
    if rtol is None:
        rtol = max(m, c) * EPS
    rank = int(np.sum(d > rtol * d[0]))
    return Q[:, :rank]


# -- matrix text format ------------------------------------------------------

def write_matrix(path: str | os.PathLike, M) -> None:
    """Write ``rows cols`` then one line per row, 17 significant digits."""
    M = np.atleast_2d(as_array(M))
    rows, cols = M.shape
    with open(path, "w") as fh:
        fh.write(f"{rows} {cols}\n")
        for row in M:
            fh.write(" ".join(format(float(v), ".17g") for v in row) + "\n")


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines()]
    if not lines:
        raise ParseError(f"{path}:1: empty file")
    header = lines[0].split()
    try:
        rows, cols = (int(v) for v in header)
    except ValueError:
        raise ParseError(f"{path}:1: expected 'rows cols', got {lines[0]!r}") from None
    if rows < 0 or cols < 0:
        raise ParseError(f"{path}:1: negative dimensions")
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != rows:
        raise ParseError(f"{path}: expected {rows} data lines, found {len(body)}")
    out = np.empty((rows, cols))
    for i, line in enumerate(body):
        fields = line.split()
        if len(fields) != cols:
            raise ParseError(f"{path}:{i + 2}: expected {cols} values, found {len(fields)}")
        try:
            out[i] = [float(v) for v in fields]
        except ValueError:
            raise ParseError(f"{path}:{i + 2}: non-numeric entry in {line!r}") from None
    return out
