"""Randomized Nystrom approximation of SPSD matrices and kernel operators with correlated Gaussian sketches."""

from .approx import (LowRankFactorization, approx_error, nystrom_plain, nystrom_stabilized,
                     optimal_error, randomized_svd, structural_bound)
from .bounds import (BoundConstants, QualityFactors, bound_constants, expected_bound,
                     quality_factors, quality_factors_for, tail_bound)
from .errors import *  # noqa: F401,F403
from .kernels import (Kernel, KernelOperator, discretize, eval_kernel, gauss_legendre,
                      legendre_projection_cov, mercer_truncation, parse_kernel, trapezoid)
from .linalg import FRO, NUC, OP, SchattenNorm, SpsdMatrix, schatten_norm
from .sketch import CovarianceSpec, PartitionedCovariance, draw_sketch, make_rng, partition_covariance
from .gpsample import GpSampleBatch, sample_gp, wasserstein_trace_check

__version__ = "0.1.0"
