"""Cyclic structural equation model: domain types and likelihood evaluators.

The model is Y = A Y + B X + C U + E*, with E* ~ N(0, Sigma*), so that
(I - A) Y = B X + C U + E*.  Both the raw-data and the summary-statistics
form of the conditional log-likelihood are provided; they agree exactly
whenever the summary statistics were computed from the raw data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

LOG_2PI = math.log(2.0 * math.pi)

# Pivot magnitudes below this are treated as a singular (I - A).
SINGULAR_PIVOT_TOL = 1e-12


class DimensionMismatchError(ValueError):
    """A matrix block has an inconsistent shape; the message names the block."""


class SingularModelError(ArithmeticError):
    """(I - A) is singular, so the model has no finite likelihood."""


class NotPositiveDefiniteError(ArithmeticError):
    """A covariance matrix that must be positive definite is not."""


@dataclass(frozen=True)
class Dimensions:
    """Problem sizes: p traits, k instruments, l covariates, n samples."""

    p: int
    k: int
    l: int
    n: int

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"trait count p must be >= 1, got {self.p}")
        if self.n < 1:
            raise ValueError(f"sample size n must be >= 1, got {self.n}")
        if self.k < 0 or self.l < 0:
            raise ValueError(f"instrument/covariate counts must be >= 0, got k={self.k}, l={self.l}")


def _check_shape(name, arr, shape):
    if arr.shape != shape:
        raise DimensionMismatchError(f"{name} has shape {arr.shape}, expected {shape}")


@dataclass
class SummaryStatistics:
    """The six empirical second-moment blocks plus the sample size.

    Blocks are 1/n-scaled raw (uncentered) cross moments; data are assumed
    to be centered by the caller, since the model carries no intercept.
    """

    s_yy: np.ndarray
    s_yx: np.ndarray
    s_yu: np.ndarray
    s_xx: np.ndarray
    s_xu: np.ndarray
    s_uu: np.ndarray
    dims: Dimensions

    def __post_init__(self):
        p, k, l = self.dims.p, self.dims.k, self.dims.l
        for name in ("s_yy", "s_yx", "s_yu", "s_xx", "s_xu", "s_uu"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        _check_shape("s_yy", self.s_yy, (p, p))
        _check_shape("s_yx", self.s_yx, (p, k))
        _check_shape("s_yu", self.s_yu, (p, l))
        _check_shape("s_xx", self.s_xx, (k, k))
        _check_shape("s_xu", self.s_xu, (k, l))
        _check_shape("s_uu", self.s_uu, (l, l))

    def validate(self, tol=1e-8):
        """Check symmetry of the square blocks and joint positive semidefiniteness."""
        for name in ("s_yy", "s_xx", "s_uu"):
            block = getattr(self, name)
            if block.size and not np.allclose(block, block.T, atol=tol, rtol=tol):
                raise DimensionMismatchError(f"{name} is not symmetric")
        joint = self.joint_matrix()
        if joint.size:
            min_eig = float(np.linalg.eigvalsh(joint).min())
            scale = max(1.0, float(np.abs(np.diag(joint)).max(initial=0.0)))
            if min_eig < -tol * scale:
                raise NotPositiveDefiniteError(
                    f"joint second-moment matrix has eigenvalue {min_eig:.3e} < 0"
                )
        return self

    def joint_matrix(self):
        """Assemble the (p+k+l) x (p+k+l) joint second-moment matrix."""
        top = np.hstack([self.s_yy, self.s_yx, self.s_yu])
        mid = np.hstack([self.s_yx.T, self.s_xx, self.s_xu])
        bot = np.hstack([self.s_yu.T, self.s_xu.T, self.s_uu])
        return np.vstack([top, mid, bot])


@dataclass
class ModelParameters:
    """Causal effects A, instrument effects B, covariate effects C, error covariance Sigma*."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    sigma_star: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        self.sigma_star = np.asarray(self.sigma_star, dtype=float)

    @property
    def p(self):
        return self.a.shape[0]

    def validate(self):
        p = self.p
        _check_shape("A", self.a, (p, p))
        if self.b.shape[0] != p:
            raise DimensionMismatchError(f"B has {self.b.shape[0]} rows, expected {p}")
        if self.c.shape[0] != p:
            raise DimensionMismatchError(f"C has {self.c.shape[0]} rows, expected {p}")
        _check_shape("Sigma*", self.sigma_star, (p, p))
        if np.any(np.diag(self.a) != 0.0):
            raise ValueError("A has non-zero diagonal entries (self-loops are not allowed)")
        if not np.allclose(self.sigma_star, self.sigma_star.T, atol=1e-10):
            raise NotPositiveDefiniteError("Sigma* is not symmetric")
        if _chol_lower(self.sigma_star) is None:
            raise NotPositiveDefiniteError("Sigma* is not positive definite")
        if logabsdet_i_minus_a(self.a) is None:
            raise SingularModelError("(I - A) is singular")
        return self


@dataclass
class RawDataSet:
    """Individual-level data: traits Y (n x p), instruments X (n x k), covariates U (n x l)."""

    y: np.ndarray
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        n = self.y.shape[0]
        if self.x.size == 0:
            self.x = self.x.reshape(n, -1)
        if self.u.size == 0:
            self.u = self.u.reshape(n, -1)

    @property
    def dims(self):
        n, p = self.y.shape
        if self.x.shape[0] != n:
            raise DimensionMismatchError(f"X has {self.x.shape[0]} rows, Y has {n}")
        if self.u.shape[0] != n:
            raise DimensionMismatchError(f"U has {self.u.shape[0]} rows, Y has {n}")
        return Dimensions(p=p, k=self.x.shape[1], l=self.u.shape[1], n=n)


def logabsdet_i_minus_a(a):
    """log|det(I - A)| via LU with absolute-value pivot accumulation.

    Returns None when any pivot magnitude falls below SINGULAR_PIVOT_TOL.
    """
    f = np.eye(a.shape[0]) - a
    return _logabsdet(f)


def _logabsdet(f):
    with warnings.catch_warnings():
        # Exact singularity is an expected, handled outcome here.
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, _ = scipy.linalg.lu_factor(f, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min(initial=1.0) < SINGULAR_PIVOT_TOL:
        return None
    return float(np.log(pivots).sum())


def _chol_lower(sigma):
    """Lower Cholesky factor of a symmetric matrix, or None if not PD."""
    try:
        return scipy.linalg.cholesky(sigma, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        return None


def _chol_inverse(chol_l):
    """Invert a matrix from its lower Cholesky factor."""
    identity = np.eye(chol_l.shape[0])
    return scipy.linalg.cho_solve((chol_l, True), identity, check_finite=False)


def compute_sufficient_stats(data: RawDataSet) -> SummaryStatistics:
    """All six 1/n-scaled second-moment blocks of (Y, X, U).

    No centering is applied; callers must center raw data beforehand.
    """
    dims = data.dims
    n = dims.n
    y, x, u = data.y, data.x, data.u
    stats = SummaryStatistics(
        s_yy=y.T @ y / n,
        s_yx=y.T @ x / n,
        s_yu=y.T @ u / n,
        s_xx=x.T @ x / n,
        s_xu=x.T @ u / n,
        s_uu=u.T @ u / n,
        dims=dims,
    )
    return stats.validate()


def log_likelihood_raw(params: ModelParameters, data: RawDataSet) -> float:
    """Sum of per-sample Gaussian log-densities of (I-A)y - Bx - Cu, plus the Jacobian term.

    Returns -inf for singular (I - A) or non-positive-definite Sigma*, so MH
    steps can treat invalid proposals as zero-probability rather than abort.
    """
    dims = data.dims
    p, n = dims.p, dims.n
    ld_f = logabsdet_i_minus_a(params.a)
    if ld_f is None:
        return float("-inf")
    chol = _chol_lower(params.sigma_star)
    if chol is None:
        return float("-inf")
    f = np.eye(p) - params.a
    resid = data.y @ f.T - data.x @ params.b.T - data.u @ params.c.T
    # Solve L w = resid^T so that the quadratic form is ||w||^2 per sample.
    w = scipy.linalg.solve_triangular(chol, resid.T, lower=True, check_finite=False)
    quad = float(np.sum(w * w))
    ld_sigma = 2.0 * float(np.log(np.diag(chol)).sum())
    return -0.5 * n * p * LOG_2PI - 0.5 * n * ld_sigma + n * ld_f - 0.5 * quad


def quadratic_form(params: ModelParameters, stats: SummaryStatistics, precision=None):
    """The per-sample quadratic Q of the summary-form likelihood.

    Q = tr(S_yy F' P F) - 2 tr(S_yx B' P F) - 2 tr(S_yu C' P F)
        + tr(S_xx B' P B) + tr(S_uu C' P C) + 2 tr(S_xu C' P B)
    with F = I - A and P = Sigma*^{-1}.
    """
    p = params.p
    if precision is None:
        chol = _chol_lower(params.sigma_star)
        if chol is None:
            raise NotPositiveDefiniteError("Sigma* is not positive definite")
        precision = _chol_inverse(chol)
    f = np.eye(p) - params.a
    pf = precision @ f
    pb = precision @ params.b
    pc = precision @ params.c
    q = float(np.sum(stats.s_yy * (f.T @ pf)))
    q -= 2.0 * float(np.sum(params.b * (pf @ stats.s_yx)))
    q += float(np.sum(pb * (params.b @ stats.s_xx)))
    if stats.dims.l:
        q -= 2.0 * float(np.sum(params.c * (pf @ stats.s_yu)))
        q += float(np.sum(pc * (params.c @ stats.s_uu)))
        q += 2.0 * float(np.sum(params.c * (pb @ stats.s_xu)))
    return q


def log_likelihood_summary(params: ModelParameters, stats: SummaryStatistics) -> float:
    """Summary-statistics form of the conditional log-likelihood.

    Equals log_likelihood_raw on the data that produced the statistics.
    Returns -inf on singular (I - A) or non-PD Sigma*.
    """
    dims = stats.dims
    p, n = dims.p, dims.n
    ld_f = logabsdet_i_minus_a(params.a)
    if ld_f is None:
        return float("-inf")
    chol = _chol_lower(params.sigma_star)
    if chol is None:
        return float("-inf")
    precision = _chol_inverse(chol)
    ld_sigma = 2.0 * float(np.log(np.diag(chol)).sum())
    q = quadratic_form(params, stats, precision=precision)
    return -0.5 * n * p * LOG_2PI - 0.5 * n * ld_sigma + n * ld_f - 0.5 * n * q


def residual_scatter(params: ModelParameters, stats: SummaryStatistics, tau_c: float) -> np.ndarray:
    """Residual scatter matrix driving the error-covariance update.

    S = n * [(I-A) S_yy (I-A)' - (I-A) S_yx B' - B S_yx' (I-A)' + B S_xx B'
             + C S_uu C' - (I-A) S_yu C' - C S_yu' (I-A)' + B S_xu C' + C S_xu' B']
        + C C' / tau_c

    and satisfies tr(Sigma*^{-1} S) = n * Q + tr(Sigma*^{-1} C C') / tau_c.
    """
    if tau_c <= 0:
        raise ValueError(f"tau_c must be positive, got {tau_c}")
    p, n = stats.dims.p, stats.dims.n
    f = np.eye(p) - params.a
    b, c = params.b, params.c
    fsyx_bt = f @ stats.s_yx @ b.T
    scatter = f @ stats.s_yy @ f.T - fsyx_bt - fsyx_bt.T + b @ stats.s_xx @ b.T
    if stats.dims.l:
        fsyu_ct = f @ stats.s_yu @ c.T
        bsxu_ct = b @ stats.s_xu @ c.T
        scatter += c @ stats.s_uu @ c.T - fsyu_ct - fsyu_ct.T + bsxu_ct + bsxu_ct.T
    scatter = n * scatter + c @ c.T / tau_c
    return 0.5 * (scatter + scatter.T)


def reduced_form(params: ModelParameters):
    """Reduced-form coefficients and marginal covariance.

    Returns (GX, GU, V) with GX = (I-A)^{-1} B, GU = (I-A)^{-1} C and
    V = (I-A)^{-1} Sigma* (I-A)^{-T}.  Raises on singular (I - A).
    """
    p = params.p
    f = np.eye(p) - params.a
    if _logabsdet(f) is None:
        raise SingularModelError("(I - A) is singular; no reduced form exists")
    lu, piv = scipy.linalg.lu_factor(f, check_finite=False)
    gx = scipy.linalg.lu_solve((lu, piv), params.b, check_finite=False)
    gu = scipy.linalg.lu_solve((lu, piv), params.c, check_finite=False)
    f_inv = scipy.linalg.lu_solve((lu, piv), np.eye(p), check_finite=False)
    v = f_inv @ params.sigma_star @ f_inv.T
    return gx, gu, 0.5 * (v + v.T)
