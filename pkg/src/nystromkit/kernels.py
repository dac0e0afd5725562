"""Kernel catalogue and quadrature discretization of integral operators on [-1, 1]^d.

An integral operator ``f -> int G(., y) f(y) dy`` is represented by the
symmetric matrix ``A = W^{1/2} G W^{1/2}`` with ``G_ij = G(x_i, x_j)`` and
quadrature weights ``W``. Euclidean inner products of ``W^{1/2} f`` then
approximate L2 inner products, so eigenvalues and Schatten norms of ``A``
approximate those of the operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import OutOfDomain, ParseError, TooManyNodes
from .linalg import MAX_COLS, SpsdMatrix

KINDS = ("sqexp", "matern", "pretty", "legproj", "custom")
_DOMAIN_ATOL = 1e-12


@dataclass(frozen=True)
class Kernel:
    """Catalogue kernel: ``kind`` plus parameters on [-1, 1]^dim."""

    kind: str
    params: dict = field(default_factory=dict)
    dim: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise ValueError("only dimensions 1 and 2 are supported")
        if self.kind == "pretty" and self.dim != 1:
            raise ValueError("the 'pretty' kernel is defined on [-1, 1] only")
        if self.kind == "matern" and float(self.params.get("nu", 1.5)) not in (0.5, 1.5, 2.5):
            raise ValueError("matern kernels support nu in {0.5, 1.5, 2.5}")

    def __call__(self, X, Y) -> np.ndarray:
        """Kernel matrix between point sets of shape (N, dim) and (M, dim)."""
        X = _points(X, self.dim)
        Y = _points(Y, self.dim)
        if self.kind == "sqexp":
            ell = float(self.params.get("ell", 1.0))
            diff = X[:, None, :] - Y[None, :, :]
            return np.exp(-np.sum(diff * diff, axis=-1) / (2 * ell * ell))
        if self.kind == "matern":
            ell = float(self.params.get("ell", 1.0))
            r = np.sqrt(np.sum((X[:, None, :] - Y[None, :, :]) ** 2, axis=-1)) / ell
            return matern(r, float(self.params.get("nu", 1.5)))
        if self.kind == "pretty":
            x2 = X[:, 0] ** 2
            y2 = Y[:, 0] ** 2
            return 1.0 / (1.0 + 100.0 * (x2[:, None] - y2[None, :]) ** 2)
        if self.kind == "legproj":
            deg = int(self.params.get("deg", 1))
            return legendre_tensor_basis(X, deg) @ legendre_tensor_basis(Y, deg).T
        raise ValueError("custom kernels have no pointwise form; load them pre-discretized")

    @property
    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                         for k, v in sorted(self.params.items()))
        return f"{self.kind}:{inner}"


def _points(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.shape[1] != dim:
        raise ValueError(f"points must have {dim} coordinates")
    return X


def matern(r: np.ndarray, nu: float) -> np.ndarray:
    """Matern correlation with half-integer smoothness at scaled distance ``r``."""
    if nu == 0.5:
        return np.exp(-r)
    if nu == 1.5:
        s = math.sqrt(3) * r
        return (1 + s) * np.exp(-s)
    s = math.sqrt(5) * r
    return (1 + s + 5.0 / 3.0 * r * r) * np.exp(-s)


def eval_kernel(kernel: Kernel, x, y) -> float:
    """Pointwise value ``G(x, y)``; points must lie in [-1, 1]^d."""
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    ya = np.atleast_1d(np.asarray(y, dtype=float))
    for pt in (xa, ya):
        if pt.size != kernel.dim:
            raise ValueError(f"expected a point with {kernel.dim} coordinates")
        if np.any(np.abs(pt) > 1 + _DOMAIN_ATOL):
            raise OutOfDomain(f"point {pt} outside [-1, 1]^{kernel.dim}")
    return float(kernel(xa.reshape(1, -1), ya.reshape(1, -1))[0, 0])


_ALIASES = {"ℓ": "ell", "l": "ell", "lengthscale": "ell", "degree": "deg"}


def parse_kernel(spec: str, dim: int = 1) -> Kernel:
    """Parse ids such as ``sqexp:ell=0.01``, ``matern:nu=1.5``, ``pretty``, ``legproj:deg=25``."""
    kind, _, rest = spec.strip().partition(":")
    kind = kind.strip().lower()
    params = {}
    if rest:
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ParseError(f"kernel parameter {item!r} is not of the form key=value")
            key = _ALIASES.get(key.strip(), key.strip())
            try:
                params[key] = int(value) if key == "deg" else float(value)
            except ValueError:
                raise ParseError(f"bad value for {key!r} in kernel {spec!r}") from None
    if kind not in KINDS or kind == "custom":
        raise ParseError(f"unknown kernel {kind!r}; expected one of sqexp, matern, pretty, legproj")
    try:
        return Kernel(kind, params, dim)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


# -- quadrature ----------------------------------------------------------------------

class Rule(NamedTuple):
    """One-dimensional quadrature rule on [-1, 1]: ``kind`` is 'gauss' or 'trapezoid'."""

    kind: str
    n: int


def gauss_legendre(n: int) -> Rule:
    return Rule("gauss", n)


def trapezoid(n: int) -> Rule:
    return Rule("trapezoid", n)


def quadrature(rule: Rule) -> tuple[np.ndarray, np.ndarray]:
    if rule.n < 3:
        raise ValueError("quadrature needs at least 3 nodes")
    if rule.kind == "gauss":
        return np.polynomial.legendre.leggauss(rule.n)
    if rule.kind == "trapezoid":
        x = np.linspace(-1.0, 1.0, rule.n)
        h = 2.0 / (rule.n - 1)
        w = np.full(rule.n, h)
        w[0] = w[-1] = h / 2
        return x, w
    raise ValueError(f"unknown quadrature rule {rule.kind!r}")


def tensor_grid(rule: Rule, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product nodes (N, d) and weights (N,), first coordinate slowest."""
    if rule.n**d > MAX_COLS:
        raise TooManyNodes(f"{rule.n}^{d} = {rule.n**d} nodes exceeds {MAX_COLS}")
    x, w = quadrature(rule)
    if d == 1:
        return x.reshape(-1, 1), w
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return np.column_stack([X1.ravel(), X2.ravel()]), W.ravel()


@dataclass(frozen=True)
class KernelOperator:
    """Discretized integral operator ``A = W^{1/2} G W^{1/2}``."""

    kernel: Kernel
    nodes: np.ndarray
    weights: np.ndarray
    A: SpsdMatrix

    @property
    def n(self) -> int:
        return self.A.dim

    def to_grid(self, v: np.ndarray) -> np.ndarray:
        """Function values at the nodes from weighted coordinates (rows index nodes)."""
        sw = np.sqrt(self.weights)
        return v / (sw[:, None] if np.ndim(v) == 2 else sw)

    def from_grid(self, f: np.ndarray) -> np.ndarray:
        sw = np.sqrt(self.weights)
        return f * (sw[:, None] if np.ndim(f) == 2 else sw)


def weighted_matrix(G: np.ndarray, weights: np.ndarray) -> np.ndarray:
    sw = np.sqrt(weights)
    return sw[:, None] * G * sw[None, :]


def discretize(kernel: Kernel, rule: Rule, d: int | None = None, check: bool = True) -> KernelOperator:
    """Discretize ``kernel`` on the tensor grid of ``rule`` in ``d`` dimensions."""
    d = kernel.dim if d is None else d
    if d != kernel.dim:
        kernel = Kernel(kernel.kind, dict(kernel.params), d)
    nodes, weights = tensor_grid(rule, d)
    A = SpsdMatrix(weighted_matrix(kernel(nodes, nodes), weights), check=check)
    return KernelOperator(kernel, nodes, weights, A)


# -- Legendre projection kernels ---------------------------------------------------------

def legendre_basis(x, m: int) -> np.ndarray:
    """First ``m`` Legendre polynomials normalized so that ``int_{-1}^{1} p_i^2 = 1``.

    Returns an array of shape ``(len(x), m)``; built with the three-term recurrence.
    """
    x = np.asarray(x, dtype=float).ravel()
    P = np.empty((x.size, m))
    if m == 0:
        return P
    P[:, 0] = 1.0
    if m > 1:
        P[:, 1] = x
    for i in range(1, m - 1):
        P[:, i + 1] = ((2 * i + 1) * x * P[:, i] - i * P[:, i - 1]) / (i + 1)
    return P * np.sqrt((2 * np.arange(m) + 1) / 2.0)


def legendre_tensor_basis(X: np.ndarray, m: int) -> np.ndarray:
    """Tensor products of the first ``m`` normalized Legendre polynomials per coordinate."""
    X = np.atleast_2d(X)
    out = legendre_basis(X[:, 0], m)
    for j in range(1, X.shape[1]):
        other = legendre_basis(X[:, j], m)
        out = (out[:, :, None] * other[:, None, :]).reshape(X.shape[0], -1)
    return out


def legendre_projection_cov(degree_per_dim: int, d: int, rule: Rule) -> KernelOperator:
    """Projection kernel onto the tensor Legendre space, discretized on ``rule``.

    Under an exact quadrature the result is an orthogonal projection with
    ``degree_per_dim ** d`` unit eigenvalues.
    """
    if degree_per_dim < 1:
        raise ValueError("degree_per_dim must be >= 1")
    nodes, weights = tensor_grid(rule, d)
    Phi = np.sqrt(weights)[:, None] * legendre_tensor_basis(nodes, degree_per_dim)
    A = SpsdMatrix(Phi @ Phi.T, check=False)
    return KernelOperator(Kernel("legproj", {"deg": degree_per_dim}, d), nodes, weights, A)


def mercer_truncation(eigvals, eigvecs, r: int, nodes=None, weights=None) -> KernelOperator:
    """Rank-r operator ``sum_{i<r} lambda_i v_i v_i^T`` in the weighted grid geometry."""
    lam = np.asarray(eigvals, dtype=float)
    V = np.asarray(eigvecs, dtype=float)
    if r > lam.size:
        raise ValueError(f"only {lam.size} terms available, asked for {r}")
    Ar = (V[:, :r] * lam[:r]) @ V[:, :r].T
    n = V.shape[0]
    nodes = np.zeros((n, 1)) if nodes is None else nodes
    weights = np.ones(n) if weights is None else weights
    dim = 1 if np.ndim(nodes) < 2 else max(1, min(2, np.shape(nodes)[1]))
    return KernelOperator(Kernel("custom", {}, dim), nodes, weights, SpsdMatrix(Ar, check=False))


def operator_from_matrix(M: np.ndarray) -> KernelOperator:
    """Wrap a pre-discretized matrix (unit weights) as a custom operator."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    return KernelOperator(Kernel("custom", {}, 1), np.zeros((n, 1)), np.ones(n), SpsdMatrix(M))
