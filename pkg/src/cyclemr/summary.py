"""Posterior summaries: inclusion probabilities, sparsified estimates, total effects."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mcmc import SELECTION, Chain

CREDIBLE_LEVEL = 0.95


@dataclass
class FitSummary:
    """Point estimates and structures derived from a chain.

    Sparse estimates are Hadamard products of posterior means with
    thresholded inclusion probabilities.  Credible intervals are
    equal-tailed at 95%, stored as (..., 2) arrays of (lower, upper).
    """

    pip_a: np.ndarray
    pip_b: np.ndarray
    pip_z: np.ndarray
    mean_a: np.ndarray
    mean_b: np.ndarray
    mean_c: np.ndarray
    mean_sigma_star: np.ndarray
    sparse_a: np.ndarray
    sparse_b: np.ndarray
    sparse_sigma_star: np.ndarray
    ci_a: np.ndarray
    ci_b: np.ndarray
    ci_c: np.ndarray
    ci_sigma_star: np.ndarray
    threshold_a: float
    threshold_b: float
    threshold_z: float
    instrument_mode: str


def _credible_interval(samples):
    lo = (1.0 - CREDIBLE_LEVEL) / 2.0
    return np.stack(
        [np.quantile(samples, lo, axis=0), np.quantile(samples, 1.0 - lo, axis=0)], axis=-1
    )


def summarize(chain: Chain, threshold_a=0.5, threshold_b=0.5, threshold_z=0.5) -> FitSummary:
    """Posterior inclusion probabilities and thresholded sparsified estimates.

    In fixed-map mode the instrument PIPs are the structural support mask,
    so downstream consumers see a uniform interface across variants.
    """
    if chain.n_samples == 0:
        raise ValueError("chain holds no stored samples")
    mode = chain.config.hyper.instrument_mode
    pip_a = chain.gamma.mean(axis=0)
    pip_z = chain.z.mean(axis=0)
    pip_b = chain.phi.mean(axis=0) if mode == SELECTION else chain.phi[0].astype(float)
    mean_a = chain.a.mean(axis=0)
    mean_b = chain.b.mean(axis=0)
    mean_c = chain.c.mean(axis=0)
    mean_sigma = chain.sigma_star.mean(axis=0)
    sparse_a = mean_a * (pip_a >= threshold_a)
    np.fill_diagonal(sparse_a, 0.0)
    sparse_b = mean_b * (pip_b >= threshold_b)
    sparse_sigma = mean_sigma * (pip_z >= threshold_z)
    np.fill_diagonal(sparse_sigma, np.diag(mean_sigma))
    return FitSummary(
        pip_a=pip_a,
        pip_b=pip_b,
        pip_z=pip_z,
        mean_a=mean_a,
        mean_b=mean_b,
        mean_c=mean_c,
        mean_sigma_star=mean_sigma,
        sparse_a=sparse_a,
        sparse_b=sparse_b,
        sparse_sigma_star=sparse_sigma,
        ci_a=_credible_interval(chain.a),
        ci_b=_credible_interval(chain.b),
        ci_c=_credible_interval(chain.c),
        ci_sigma_star=_credible_interval(chain.sigma_star),
        threshold_a=threshold_a,
        threshold_b=threshold_b,
        threshold_z=threshold_z,
        instrument_mode=mode,
    )


def total_effect_trivariate(a: np.ndarray) -> float:
    """Total causal effect of trait 2 on trait 1 in a three-trait network.

    t12 = (a_12 + a_13 a_32) / |1 - a_13 a_31|, combining the direct
    effect, the path mediated through trait 3, and the amplification from
    the reciprocal relationship between traits 1 and 3.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (3, 3):
        raise ValueError(f"expected a 3x3 effect matrix, got shape {a.shape}")
    denom = abs(1.0 - a[0, 2] * a[2, 0])
    if denom == 0.0:
        raise ZeroDivisionError("total effect undefined: 1 - a_13 a_31 is zero")
    return float((a[0, 1] + a[0, 2] * a[2, 1]) / denom)
