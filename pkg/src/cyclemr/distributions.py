"""Samplers for the non-standard distributions the MCMC needs.

Every sampler is a deterministic function of its parameters and the numpy
Generator handed in, so identical seeds reproduce identical streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import LOG_2PI, NotPositiveDefiniteError, _chol_lower


@dataclass(frozen=True)
class GigParams:
    """Generalized inverse Gaussian with density f(x) ~ x^(p_order-1) exp(-(a*x + b/x)/2).

    Valid when both a and b are positive (any order), when b = 0 with a > 0
    and p_order > 0 (gamma limit), or when a = 0 with b > 0 and p_order < 0
    (inverse-gamma limit).
    """

    p_order: float
    a: float
    b: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"GIG rates must be non-negative, got a={self.a}, b={self.b}")
        if self.b == 0 and not (self.a > 0 and self.p_order > 0):
            raise ValueError("GIG with b=0 requires a > 0 and p_order > 0")
        if self.a == 0 and not (self.b > 0 and self.p_order < 0):
            raise ValueError("GIG with a=0 requires b > 0 and p_order < 0")


def _gig_psi(x, alpha, lam):
    return -alpha * (math.cosh(x) - 1.0) - lam * (math.exp(x) - x - 1.0)


def _gig_dpsi(x, alpha, lam):
    return -alpha * math.sinh(x) - lam * (math.exp(x) - 1.0)


def sample_gig(params: GigParams, rng: np.random.Generator) -> float:
    """One draw from the generalized inverse Gaussian distribution.

    Uses the uniformly fast rejection method of Devroye (2014) in the
    two-parameter (lam, omega) standardization; valid over the whole
    parameter range, including the very negative orders produced by the
    error-covariance update at large n.
    """
    p, a, b = params.p_order, params.a, params.b
    if b == 0.0:
        return float(rng.gamma(p, 2.0 / a))
    if a == 0.0:
        return float(b / (2.0 * rng.gamma(-p, 1.0)))

    lam = p
    omega = math.sqrt(a * b)
    swap = lam < 0
    if swap:
        lam = -lam
    alpha = math.sqrt(omega * omega + lam * lam) - lam

    # Locate the envelope break points t and s.
    x = -_gig_psi(1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        t = 1.0
    elif x > 2.0:
        t = math.sqrt(2.0 / (alpha + lam))
    else:
        t = math.log(4.0 / (alpha + 2.0 * lam))

    x = -_gig_psi(-1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        s = 1.0
    elif x > 2.0:
        s = math.sqrt(4.0 / (alpha * math.cosh(1.0) + lam))
    elif alpha == 0.0:
        s = 1.0 / lam
    else:
        inv_alpha = 1.0 / alpha
        cand = math.log(1.0 + inv_alpha + math.sqrt(inv_alpha * inv_alpha + 2.0 * inv_alpha))
        s = cand if lam == 0.0 else min(1.0 / lam, cand)

    eta = -_gig_psi(t, alpha, lam)
    zeta = -_gig_dpsi(t, alpha, lam)
    theta = -_gig_psi(-s, alpha, lam)
    xi = _gig_dpsi(-s, alpha, lam)
    inv_xi = 1.0 / xi
    inv_zeta = 1.0 / zeta
    td = t - inv_zeta * eta
    sd = s - inv_xi * theta
    q = td + sd
    total = inv_xi + q + inv_zeta

    while True:
        u = rng.random() * total
        v = rng.random()
        if u < q:
            rnd = -sd + q * v
        elif u < q + inv_zeta:
            rnd = td - inv_zeta * math.log(v)
        else:
            rnd = -sd + inv_xi * math.log(v)
        if -sd <= rnd <= td:
            envelope = 1.0
        elif rnd > td:
            envelope = math.exp(-eta - zeta * (rnd - t))
        else:
            envelope = math.exp(-theta + xi * (rnd + s))
        if rng.random() * envelope <= math.exp(_gig_psi(rnd, alpha, lam)):
            break

    # Transform back from the standardized variable.
    out = math.exp(rnd) * (lam / omega + math.sqrt(1.0 + lam * lam / (omega * omega)))
    if swap:
        out = 1.0 / out
    return out / math.sqrt(a / b)


@dataclass
class MatrixNormalParams:
    """Mean matrix plus SPD row and column covariances."""

    mean: np.ndarray
    row_cov: np.ndarray
    col_cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.row_cov = np.asarray(self.row_cov, dtype=float)
        self.col_cov = np.asarray(self.col_cov, dtype=float)
        p, l = self.mean.shape
        if self.row_cov.shape != (p, p):
            raise ValueError(f"row covariance shape {self.row_cov.shape} != ({p}, {p})")
        if self.col_cov.shape != (l, l):
            raise ValueError(f"column covariance shape {self.col_cov.shape} != ({l}, {l})")


def sample_matrix_normal(params: MatrixNormalParams, rng: np.random.Generator) -> np.ndarray:
    """Draw M + L_row Z L_col' with Z iid standard normal.

    The vectorized draw has covariance ColCov (x) RowCov.
    """
    l_row = _chol_lower(params.row_cov)
    if l_row is None:
        raise NotPositiveDefiniteError("matrix-normal row covariance is not positive definite")
    l_col = _chol_lower(params.col_cov)
    if l_col is None:
        raise NotPositiveDefiniteError("matrix-normal column covariance is not positive definite")
    z = rng.standard_normal(params.mean.shape)
    return params.mean + l_row @ z @ l_col.T


def matrix_normal_logpdf(x, params: MatrixNormalParams) -> float:
    """Log-density of a matrix-normal draw; used only by tests."""
    x = np.asarray(x, dtype=float)
    p, l = params.mean.shape
    l_row = _chol_lower(params.row_cov)
    l_col = _chol_lower(params.col_cov)
    if l_row is None or l_col is None:
        raise NotPositiveDefiniteError("matrix-normal covariance is not positive definite")
    diff = x - params.mean
    w = scipy.linalg.solve_triangular(l_row, diff, lower=True, check_finite=False)
    w = scipy.linalg.solve_triangular(l_col, w.T, lower=True, check_finite=False)
    quad = float(np.sum(w * w))
    ld_row = 2.0 * float(np.log(np.diag(l_row)).sum())
    ld_col = 2.0 * float(np.log(np.diag(l_col)).sum())
    return -0.5 * (p * l * LOG_2PI + l * ld_row + p * ld_col + quad)


def sample_inverse_gamma(shape, scale, rng: np.random.Generator):
    """Inverse gamma with density ~ x^(-shape-1) exp(-scale/x); accepts array arguments.

    Draws are clamped to the representable range [1e-300, 1e300]: the
    underlying gamma generator can return exact zeros (probability ~2^-53
    per draw), which would otherwise cascade inf/0 through the samplers.
    """
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(shape <= 0) or np.any(scale <= 0):
        raise ValueError("inverse-gamma parameters must be positive")
    gamma = rng.gamma(shape, 1.0, size=np.broadcast_shapes(shape.shape, scale.shape))
    with np.errstate(divide="ignore", over="ignore"):
        draw = np.clip(scale / gamma, 1e-300, 1e300)
    return float(draw) if draw.ndim == 0 else draw


def sample_beta(a, b, rng: np.random.Generator):
    """Standard beta; accepts array arguments."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("beta shapes must be positive")
    draw = rng.beta(a, b)
    return float(draw) if np.ndim(draw) == 0 else draw


def sample_bernoulli(q, rng: np.random.Generator):
    """Bernoulli indicator draw; q clamped to [0, 1] within 1e-12 slack."""
    q = np.asarray(q, dtype=float)
    if np.any(q < -1e-12) or np.any(q > 1.0 + 1e-12):
        raise ValueError("bernoulli probability outside [0, 1]")
    q = np.clip(q, 0.0, 1.0)
    draw = (rng.random(q.shape) < q).astype(np.int8)
    return int(draw) if draw.ndim == 0 else draw
