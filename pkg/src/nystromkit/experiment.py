"""Rank-sweep experiments: configuration files, error curves and CSV output.

A config file is line oriented, ``key = value`` with ``#`` comments::

    kernel = pretty
    covariance = sqexp:ell=1 sqexp:ell=0.01   # one CSV per covariance
    rule = gauss
    n = 400
    k = 5:100:5                              # start:stop:step, stop included
    p = 5
    trials = 3
    seed = 0
    output = pretty.csv

Errors are relative to ``||A||`` in the same norm. Bound columns hold the
expectation bounds divided by ``||A||``; they are NaN where the bounds do
not apply (k < 2, too little oversampling, singular ``K11`` or zero tail).
"""

from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._parallel import pmap
from .approx import nystrom_plain, nystrom_stabilized, optimal_error, structural_bound
from .bounds import NORM_KEYS, BoundConstants, expected_bound, quality_factors_for
from .errors import (ConfigError, InvalidOversampling, InvalidRank, ParseError, ShapeMismatch,
                     SingularK11, TooManyNodes, ZeroTail)
from .kernels import (KernelOperator, Rule, discretize, legendre_projection_cov,
                      operator_from_matrix, parse_kernel)
from .linalg import MAX_COLS, _norm_from_values, as_norm, read_matrix
from .sketch import CovarianceSpec, draw_sketch, make_rng

ALGORITHMS = {"plain": nystrom_plain, "stabilized": nystrom_stabilized}
CURVE_FIELDS = ("k", "trial", "err_op_rel", "err_F_rel", "err_Tr_rel", "optimal_Tr_rel",
                "bound_Tr", "bound_F", "bound_op")
STRUCTURAL_ATOL = 1e-8
OMEGA1_RCOND = 1e-8


# -- operators and covariances --------------------------------------------------------

def build_operator(spec: str, rule: Rule, d: int = 1) -> KernelOperator:
    """Kernel id (``pretty``, ``sqexp:ell=0.1``, ...) or a matrix text file."""
    if os.path.isfile(spec):
        return operator_from_matrix(read_matrix(spec))
    kernel = parse_kernel(spec, d)
    if kernel.kind == "legproj":
        return legendre_projection_cov(int(kernel.params.get("deg", 1)), d, rule)
    return discretize(kernel, rule, d)


def build_covariance(spec: str, target: KernelOperator, rule: Rule, d: int = 1) -> CovarianceSpec:
    """Sketch covariance discretized on the same grid as ``target``."""
    if spec.strip().lower() in ("identity", "i"):
        return CovarianceSpec.identity(target.n)
    if not os.path.isfile(spec) and target.kernel.kind == "custom":
        raise ParseError("a kernel covariance needs a kernel target; pass a matrix file instead")
    op = build_operator(spec, rule, d)
    if op.n != target.n:
        raise ShapeMismatch(f"covariance has dimension {op.n}, target has {target.n}")
    return CovarianceSpec(op.A)


# -- configuration ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    kernel: str
    covariances: tuple[str, ...]
    n: int
    ks: tuple[int, ...]
    rule: str = "gauss"
    d: int = 1
    p: int = 5
    trials: int = 1
    seed: int = 0
    norms: tuple[str, ...] = NORM_KEYS
    algo: str = "stabilized"
    output: str = "curves.csv"

    @property
    def grid(self) -> Rule:
        return Rule(self.rule, self.n)

    def output_paths(self) -> list[str]:
        """One CSV per covariance; with several, a suffix derived from the id is added."""
        if len(self.covariances) == 1:
            return [self.output]
        stem, ext = os.path.splitext(self.output)
        return [f"{stem}_{_slug(c)}{ext or '.csv'}" for c in self.covariances]


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", os.path.basename(label)).strip("_")


def parse_rank_sweep(text: str) -> tuple[int, ...]:
    """``"5:100:5"`` (inclusive stop) or a list such as ``"10 20 40"``."""
    text = text.strip()
    if ":" in text:
        parts = [int(v) for v in text.split(":")]
        if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] <= 0):
            raise ValueError("range must be start:stop[:step] with a positive step")
        step = parts[2] if len(parts) == 3 else 1
        return tuple(range(parts[0], parts[1] + 1, step))
    return tuple(int(v) for v in text.replace(",", " ").split())


_INT_KEYS = {"n": "n", "d": "d", "p": "p", "trials": "trials", "seed": "seed"}
_KNOWN = {"kernel", "covariance", "rule", "k", "norms", "algo", "output", *_INT_KEYS}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate a config; every problem is reported at once in a ConfigError."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        raw[key.strip().lower()] = value.strip()

    bad: dict[str, str] = {}
    for key in sorted(set(raw) - _KNOWN):
        bad[key] = "unknown key"
    for key in ("kernel", "covariance", "n", "k"):
        if not raw.get(key):
            bad[key] = "required"

    values: dict = {}
    for key, attr in _INT_KEYS.items():
        if key in raw:
            try:
                values[attr] = int(raw[key])
            except ValueError:
                bad[key] = f"not an integer: {raw[key]!r}"
    if raw.get("k"):
        try:
            values["ks"] = parse_rank_sweep(raw["k"])
        except ValueError as exc:
            bad["k"] = str(exc)
    if "norms" in raw:
        try:
            values["norms"] = tuple(dict.fromkeys(
                _norm_key(v) for v in raw["norms"].replace(",", " ").split()))
        except ValueError as exc:
            bad["norms"] = str(exc)
    for key in ("rule", "algo", "output", "kernel"):
        if raw.get(key):
            values[key] = raw[key]
    if raw.get("covariance"):
        values["covariances"] = tuple(raw["covariance"].split())

    _validate(values, bad)
    if bad:
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(bad.items()))
        raise ConfigError(f"{source}: invalid configuration ({detail})", keys=sorted(bad))
    return ExperimentConfig(**values)


def _norm_key(name: str) -> str:
    norm = as_norm(name)
    for key in NORM_KEYS:
        if as_norm(key) == norm:
            return key
    raise ValueError(f"norm {name!r} is not one of op, F, Tr")


def _validate(v: dict, bad: dict) -> None:
    if v.get("rule", "gauss") not in ("gauss", "trapezoid"):
        bad["rule"] = "must be 'gauss' or 'trapezoid'"
    if v.get("algo", "stabilized") not in ALGORITHMS:
        bad["algo"] = "must be 'plain' or 'stabilized'"
    d = v.get("d", 1)
    if d not in (1, 2):
        bad["d"] = "must be 1 or 2"
    n = v.get("n")
    if n is not None:
        if n < 3:
            bad["n"] = "need at least 3 nodes"
        elif d in (1, 2) and n**d > MAX_COLS:
            bad["n"] = f"{n}^{d} nodes exceeds {MAX_COLS}"
    p = v.get("p", 5)
    if p < 1:
        bad["p"] = "oversampling must be >= 1"
    if v.get("trials", 1) < 1:
        bad["trials"] = "must be >= 1"
    ks = v.get("ks")
    if ks is not None:
        if not ks:
            bad["k"] = "empty rank sweep"
        elif ks[0] < 1 or any(b <= a for a, b in zip(ks, ks[1:])):
            bad["k"] = "rank sweep must be positive and strictly increasing"
        elif n is not None and d in (1, 2) and ks[-1] + p > n**d:
            bad["k"] = f"k + p = {ks[-1] + p} exceeds the grid size {n**d}"


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), source=str(path))


# -- curves -------------------------------------------------------------------------------

class CurveRow(NamedTuple):
    k: int
    trial: int
    err_op_rel: float
    err_F_rel: float
    err_Tr_rel: float
    optimal_Tr_rel: float
    bound_Tr: float
    bound_F: float
    bound_op: float


def _norms_of(A) -> dict[str, float]:
    lam = np.abs(A.eig.eigenvalues)
    return {key: _norm_from_values(lam, as_norm(key)) for key in NORM_KEYS}


def relative_bounds(A, cov, k: int, p: int, norms=NORM_KEYS) -> dict[str, float]:
    """Expectation bounds over ``||A||``, NaN where they are not available."""
    out = {key: math.nan for key in NORM_KEYS}
    try:
        qf, s2n = quality_factors_for(A, cov, k)
    except (SingularK11, ZeroTail, InvalidRank):
        return out
    consts = BoundConstants(k, p)
    scale = _norms_of(A)
    for key in norms:
        try:
            out[key] = expected_bound(key, qf, consts, s2n) / scale[key]
        except (InvalidRank, InvalidOversampling):
            pass
    return out


def run_curve(target: KernelOperator, cov: CovarianceSpec, ks, p: int, trials: int, seed: int,
              algo: str = "stabilized", norms=NORM_KEYS) -> list[CurveRow]:
    """Rows for every ``(k, trial)``, sorted; trial ``i`` uses RNG stream ``i``."""
    A = target.A
    scale = _norms_of(A)
    approx = ALGORITHMS[algo]
    bounds = {k: relative_bounds(A, cov, k, p, norms) for k in ks}
    optimal = {k: optimal_error(A, k, "Tr") / scale["Tr"] for k in ks}

    def one(item):
        k, trial = item
        F = approx(A.entries, draw_sketch(cov, k + p, seed, stream=trial))
        resid = np.abs(np.linalg.eigvalsh(A.entries - F.to_dense()))
        err = {key: _norm_from_values(resid, as_norm(key)) / scale[key] for key in NORM_KEYS}
        b = bounds[k]
        return CurveRow(k, trial, err["op"], err["F"], err["Tr"], optimal[k],
                        b["Tr"], b["F"], b["op"])

    items = [(k, t) for k in ks for t in range(trials)]
    return sorted(pmap(one, items), key=lambda r: (r.k, r.trial))


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_curves(path: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_FIELDS)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_curves(path: str) -> list[CurveRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [CurveRow(int(r["k"]), int(r["trial"]),
                         *(float(r[f]) for f in CURVE_FIELDS[2:])) for r in reader]


# -- structural spot check -----------------------------------------------------------------

class SpotCheck(NamedTuple):
    checked: int
    skipped: int
    failures: int


def structural_spot_check(target: KernelOperator, cov: CovarianceSpec, rows, p: int, seed: int,
                          count: int = 10) -> SpotCheck:
    """Recompute the per-draw structural bound for ``count`` random rows.

    The sketch of each row is regenerated from ``(seed, trial)``. Rows whose
    ``U1^T Omega`` is numerically rank deficient are skipped since the bound
    needs a right inverse.
    """
    rows = list(rows)
    if not rows:
        return SpotCheck(0, 0, 0)
    A = target.A
    scale = _norms_of(A)
    V = A.eig.eigenvectors
    rng = make_rng(seed, 1 << 40)
    picks = rng.choice(len(rows), size=min(count, len(rows)), replace=False)
    checked = skipped = failures = 0
    for idx in sorted(picks):
        row = rows[idx]
        Omega = draw_sketch(cov, row.k + p, seed, stream=row.trial)
        sv = np.linalg.svd(V[:, :row.k].T @ Omega, compute_uv=False)
        if sv[-1] <= OMEGA1_RCOND * sv[0]:
            skipped += 1
            continue
        checked += 1
        errs = {"op": row.err_op_rel, "F": row.err_F_rel, "Tr": row.err_Tr_rel}
        for key in NORM_KEYS:
            bound = structural_bound(A, Omega, row.k, key) / scale[key]
            if errs[key] > bound + STRUCTURAL_ATOL:
                failures += 1
                break
    return SpotCheck(checked, skipped, failures)


class CurveResult(NamedTuple):
    covariance: str
    path: str
    rows: list
    spot: SpotCheck


def run_experiment(config: ExperimentConfig, write: bool = True) -> list[CurveResult]:
    """Run every covariance of ``config``; optionally write the CSV files."""
    try:
        target = build_operator(config.kernel, config.grid, config.d)
    except TooManyNodes as exc:
        raise ConfigError(str(exc), keys=["n"]) from None
    if config.ks[-1] + config.p > target.n:
        raise ConfigError(f"k + p = {config.ks[-1] + config.p} exceeds dimension {target.n}", keys=["k"])
    results = []
    for spec, path in zip(config.covariances, config.output_paths()):
        cov = build_covariance(spec, target, config.grid, config.d)
        rows = run_curve(target, cov, config.ks, config.p, config.trials, config.seed,
                         config.algo, config.norms)
        spot = structural_spot_check(target, cov, rows, config.p, config.seed)
        if write:
            write_curves(path, rows)
        results.append(CurveResult(spec, path, rows, spot))
    return results
