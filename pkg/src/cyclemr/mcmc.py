"""Eleven-step Markov kernel for the cyclic SEM, chain management, and variants.

One iteration applies, in order: Beta updates for the instrument-slab
weights, the half-Cauchy scale hierarchy and inclusion indicators for B,
random-walk Metropolis on B entries, the mirrored four updates for A, an
exact matrix-normal Gibbs draw for C, Bernoulli updates for the
confounding indicators, and a column-wise blocked Gibbs draw for the
error covariance that preserves positive definiteness by construction.

Two variants share the kernel: a fixed instrument map with plain normal
priors on the structurally non-zero entries of B, and full spike-and-slab
selection over all instrument-trait pairs.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import expit

from .distributions import GigParams, sample_beta, sample_bernoulli, sample_gig, sample_inverse_gamma
from .model import (
    ModelParameters,
    NotPositiveDefiniteError,
    SummaryStatistics,
    _chol_inverse,
    _chol_lower,
    log_likelihood_summary,
    residual_scatter,
)

logger = logging.getLogger(__name__)

FIXED_MAP = "fixed-map"
SELECTION = "selection"

# Floor for the GIG quadratic argument; only reachable through rounding.
GIG_QUAD_FLOOR = 1e-12

# Robbins-Monro target acceptance rate for the random-walk proposals.
ADAPT_TARGET = 0.35


class NumericalError(ArithmeticError):
    """The sampler reached a numerically invalid state."""


@dataclass
class Hyperparameters:
    """Fixed prior and proposal constants.

    nu1/nu2 are the spike shrink factors for A and B, lam is both the
    exponential rate on the error-covariance diagonal and the linear GIG
    rate, and xi_a/xi_b are random-walk proposal variances.

    The default nu1 is much smaller than nu2 because causal effects live
    on a far smaller scale than instrument effects; a 1e-2 shrink leaves
    the spike wide enough to swallow every causal effect the slab should
    capture.
    """

    nu1: float = 1e-4
    nu2: float = 0.01
    a_rho: float = 1.0
    b_rho: float = 1.0
    a_psi: float = 1.0
    b_psi: float = 1.0
    omega1: float = 1.0
    omega2: float = 0.01
    pi_z: float = 0.5
    lam: float = 5.0
    tau_c: float = 10.0
    xi_a: float = 0.01
    xi_b: float = 0.01
    instrument_mode: str = FIXED_MAP
    b_prior_sd: float = 10.0

    def validate(self):
        if not (0.0 < self.nu1 < 1.0 and 0.0 < self.nu2 < 1.0):
            raise ValueError("spike shrink factors nu1, nu2 must lie in (0, 1)")
        for name in ("a_rho", "b_rho", "a_psi", "b_psi", "lam", "tau_c", "xi_a", "xi_b", "b_prior_sd"):
            if getattr(self, name) <= 0:
                raise ValueError(f"hyperparameter {name} must be positive")
        if not 0.0 <= self.pi_z <= 1.0:
            raise ValueError("pi_z must lie in [0, 1]")
        if self.omega2 < 0.01:
            raise ValueError("omega2 must be at least 0.01")
        if self.omega1 / self.omega2 > 1000.0:
            raise ValueError("omega1/omega2 must not exceed 1000")
        if self.instrument_mode not in (FIXED_MAP, SELECTION):
            raise ValueError(f"unknown instrument_mode {self.instrument_mode!r}")
        return self


@dataclass
class LatentState:
    """Spike-and-slab indicators and scales for one MCMC state.

    gamma/rho/tau drive the entries of A, phi/psi/eta drive B, z the
    confounding indicators.  aux_a/aux_b hold the auxiliary inverse-gamma
    variables of the half-Cauchy hierarchy; they are redrawn every
    iteration and never stored in the chain.
    """

    gamma: np.ndarray
    rho: np.ndarray
    tau: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    eta: np.ndarray
    z: np.ndarray
    aux_a: np.ndarray
    aux_b: np.ndarray


@dataclass
class ChainState:
    """One point of the chain with its cached summary log-likelihood."""

    params: ModelParameters
    latent: LatentState
    log_lik: float
    iteration: int = 0


@dataclass
class McmcConfig:
    iterations: int = 50_000
    burn_in: int = 10_000
    thin: int = 10
    seed: int = 0
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    fixed_b_support: np.ndarray | None = None
    adapt_proposals: bool = True

    def validate(self):
        if self.iterations < 1 or self.thin < 1:
            raise ValueError("iterations and thin must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        self.hyper.validate()
        if self.hyper.instrument_mode == FIXED_MAP and self.fixed_b_support is None:
            raise ValueError("fixed-map mode requires fixed_b_support")
        return self


@dataclass
class Chain:
    """Thinned post-burn-in samples plus per-iteration diagnostics."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    sigma_star: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray
    z: np.ndarray
    loglik: np.ndarray
    sigma_min_eig: np.ndarray
    accept_rate_a: float
    accept_rate_b: float
    xi_a: float
    xi_b: float
    config: McmcConfig

    @property
    def n_samples(self):
        return self.a.shape[0]


def _precision(sigma_star):
    chol = _chol_lower(sigma_star)
    if chol is None:
        raise NumericalError("Sigma* lost positive definiteness")
    return _chol_inverse(chol)


def _offdiag_pairs(p):
    return [(j, h) for j in range(p) for h in range(p) if j != h]


@functools.lru_cache(maxsize=None)
def _column_partitions(p):
    """Per-column (rest indices, open mesh) pairs for the blocked Gibbs sweep."""
    idx = np.arange(p)
    out = []
    for j in range(p):
        rest = idx[idx != j]
        rest.setflags(write=False)
        out.append((rest, np.ix_(rest, rest)))
    return out


def _active_b_pairs(latent, hyper):
    if hyper.instrument_mode == SELECTION:
        pj, pk = latent.phi.shape
        return [(j, h) for j in range(pj) for h in range(pk)]
    return [tuple(idx) for idx in np.argwhere(latent.phi == 1)]


def update_psi(state: ChainState, hyper: Hyperparameters, rng):
    """Step 1: conjugate Beta refresh of the instrument-slab weights."""
    latent = state.latent
    latent.psi = sample_beta(latent.phi + hyper.a_psi, 1 - latent.phi + hyper.b_psi, rng)


def update_eta(state: ChainState, hyper: Hyperparameters, rng):
    """Step 2: half-Cauchy hierarchy for the B slab scales via auxiliary inverse gammas."""
    latent = state.latent
    b = state.params.b
    eps = sample_inverse_gamma(1.0, 1.0 + 1.0 / latent.eta, rng)
    rate = np.where(latent.phi == 1, b * b / 2.0, b * b / (2.0 * hyper.nu2)) + 1.0 / eps
    latent.eta = sample_inverse_gamma(1.0, np.maximum(rate, 1e-300), rng)
    latent.aux_b = eps


def _inclusion_probability(values, scales, shrink, weights):
    """Posterior slab probability for a spike-and-slab normal mixture.

    values are the current effects, scales the slab variances, shrink the
    spike variance factor, weights the prior slab probabilities.
    """
    with np.errstate(divide="ignore"):
        log_slab = np.log(weights) - values * values / (2.0 * scales)
        log_spike = (
            np.log1p(-np.asarray(weights, dtype=float))
            - values * values / (2.0 * shrink * scales)
            - 0.5 * math.log(shrink)
        )
    return expit(log_slab - log_spike)


def update_phi(state: ChainState, hyper: Hyperparameters, rng):
    """Step 3: Bernoulli refresh of the instrument inclusion indicators."""
    latent = state.latent
    p_phi = _inclusion_probability(state.params.b, latent.eta, hyper.nu2, latent.psi)
    latent.phi = sample_bernoulli(p_phi, rng)


def update_b(state: ChainState, stats: SummaryStatistics, hyper: Hyperparameters, rng, xi=None):
    """Step 4: entrywise random-walk Metropolis on the active entries of B.

    Single-entry proposals only shift the quadratic form, so the
    acceptance ratio is evaluated from rank-one cache updates rather than
    full likelihood recomputations; the cached log-likelihood is advanced
    by the same increments.
    """
    pairs = _active_b_pairs(state.latent, hyper)
    if not pairs:
        return 0, 0
    n = stats.dims.n
    params, latent = state.params, state.latent
    b_mat = params.b
    prec = _precision(params.sigma_star)
    f = np.eye(params.p) - params.a
    g1 = prec @ f @ stats.s_yx
    g2 = prec @ b_mat @ stats.s_xx
    g3 = prec @ params.c @ stats.s_xu.T if stats.dims.l else np.zeros_like(b_mat)
    prec_diag = np.diag(prec).copy()
    sxx_diag = np.diag(stats.s_xx).copy()
    sd = math.sqrt(hyper.xi_b if xi is None else xi)
    selection = hyper.instrument_mode == SELECTION
    fixed_var = hyper.b_prior_sd**2
    deltas = (sd * rng.standard_normal(len(pairs))).tolist()
    uniforms = rng.random(len(pairs)).tolist()
    log_lik = state.log_lik
    accepted = 0
    for i, (j, h) in enumerate(pairs):
        cur = b_mat[j, h]
        delta = deltas[i]
        new = cur + delta
        d_quad = (
            2.0 * delta * (g2[j, h] - g1[j, h] + g3[j, h])
            + delta * delta * prec_diag[j] * sxx_diag[h]
        )
        d_ll = -0.5 * n * d_quad
        if selection:
            prior_var = latent.eta[j, h] if latent.phi[j, h] == 1 else hyper.nu2 * latent.eta[j, h]
        else:
            prior_var = fixed_var
        log_alpha = d_ll - (new * new - cur * cur) / (2.0 * prior_var)
        if log_alpha >= 0.0 or uniforms[i] < math.exp(log_alpha):
            b_mat[j, h] = new
            log_lik += d_ll
            g2 += delta * np.outer(prec[:, j], stats.s_xx[h, :])
            accepted += 1
    state.log_lik = log_lik
    return accepted, len(pairs)


def update_rho(state: ChainState, hyper: Hyperparameters, rng):
    """Step 5: conjugate Beta refresh of the edge-slab weights."""
    latent = state.latent
    off = ~np.eye(latent.rho.shape[0], dtype=bool)
    latent.rho[off] = sample_beta(latent.gamma[off] + hyper.a_rho, 1 - latent.gamma[off] + hyper.b_rho, rng)


def update_tau(state: ChainState, hyper: Hyperparameters, rng):
    """Step 6: half-Cauchy hierarchy for the A slab scales."""
    latent = state.latent
    off = ~np.eye(latent.tau.shape[0], dtype=bool)
    a_off = state.params.a[off]
    eps = sample_inverse_gamma(1.0, 1.0 + 1.0 / latent.tau[off], rng)
    rate = np.where(latent.gamma[off] == 1, a_off * a_off / 2.0, a_off * a_off / (2.0 * hyper.nu1))
    latent.tau[off] = sample_inverse_gamma(1.0, np.maximum(rate + 1.0 / eps, 1e-300), rng)
    latent.aux_a[off] = eps


def update_gamma(state: ChainState, hyper: Hyperparameters, rng):
    """Step 7: Bernoulli refresh of the causal-edge indicators."""
    latent = state.latent
    off = ~np.eye(latent.gamma.shape[0], dtype=bool)
    p_gamma = _inclusion_probability(
        state.params.a[off], latent.tau[off], hyper.nu1, latent.rho[off]
    )
    latent.gamma[off] = sample_bernoulli(p_gamma, rng)


def update_a(state: ChainState, stats: SummaryStatistics, hyper: Hyperparameters, rng, xi=None):
    """Step 8: entrywise random-walk Metropolis on the off-diagonal entries of A.

    The log-determinant change comes from the matrix determinant lemma and
    (I - A)^{-1} is maintained by Sherman-Morrison updates; proposals that
    would make (I - A) singular are rejected through the -inf sentinel.
    """
    params, latent = state.params, state.latent
    p = params.p
    n = stats.dims.n
    a_mat = params.a
    prec = _precision(params.sigma_star)
    f = np.eye(p) - a_mat
    f_inv = scipy.linalg.lu_solve(scipy.linalg.lu_factor(f, check_finite=False), np.eye(p), check_finite=False)
    h1 = prec @ f @ stats.s_yy
    h2 = prec @ params.b @ stats.s_yx.T
    h3 = prec @ params.c @ stats.s_yu.T if stats.dims.l else np.zeros((p, p))
    prec_diag = np.diag(prec).copy()
    syy_diag = np.diag(stats.s_yy).copy()
    sd = math.sqrt(hyper.xi_a if xi is None else xi)
    pairs = _offdiag_pairs(p)
    deltas = (sd * rng.standard_normal(len(pairs))).tolist()
    uniforms = rng.random(len(pairs)).tolist()
    log_lik = state.log_lik
    accepted = 0
    for i, (j, h) in enumerate(pairs):
        cur = a_mat[j, h]
        delta = deltas[i]
        new = cur + delta
        denom = 1.0 - delta * f_inv[h, j]
        if abs(denom) < 1e-12:
            continue
        d_quad = (
            2.0 * delta * (h2[j, h] + h3[j, h] - h1[j, h])
            + delta * delta * prec_diag[j] * syy_diag[h]
        )
        d_ll = n * math.log(abs(denom)) - 0.5 * n * d_quad
        prior_var = latent.tau[j, h] if latent.gamma[j, h] == 1 else hyper.nu1 * latent.tau[j, h]
        log_alpha = d_ll - (new * new - cur * cur) / (2.0 * prior_var)
        if log_alpha >= 0.0 or uniforms[i] < math.exp(log_alpha):
            a_mat[j, h] = new
            log_lik += d_ll
            h1 -= delta * np.outer(prec[:, j], stats.s_yy[h, :])
            f_inv += (delta / denom) * np.outer(f_inv[:, j], f_inv[h, :])
            accepted += 1
    state.log_lik = log_lik
    return accepted, len(pairs)


def update_c(state: ChainState, stats: SummaryStatistics, hyper: Hyperparameters, rng):
    """Step 9: exact matrix-normal Gibbs draw of the covariate effects (skipped when l = 0)."""
    if stats.dims.l == 0:
        return
    params = state.params
    n = stats.dims.n
    col_prec = n * stats.s_uu + np.eye(stats.dims.l) / hyper.tau_c
    chol = _chol_lower(col_prec)
    if chol is None:
        raise NumericalError("covariate-effect column precision is not positive definite")
    col_cov = _chol_inverse(chol)
    f = np.eye(params.p) - params.a
    mean = (n * f @ stats.s_yu - n * params.b @ stats.s_xu) @ col_cov
    l_row = _chol_lower(params.sigma_star)
    if l_row is None:
        raise NumericalError("Sigma* lost positive definiteness")
    l_col = _chol_lower(col_cov)
    z = rng.standard_normal(mean.shape)
    params.c = mean + l_row @ z @ l_col.T
    state.log_lik = log_likelihood_summary(params, stats)


def confounding_probability(sigma_values, hyper: Hyperparameters):
    """Step 10 slab probability for off-diagonal error-covariance entries."""
    sig = np.asarray(sigma_values, dtype=float)
    log_slab = math.log(hyper.pi_z) if hyper.pi_z > 0 else -np.inf
    log_spike = math.log1p(-hyper.pi_z) if hyper.pi_z < 1 else -np.inf
    l1 = log_slab - sig * sig / (2.0 * hyper.omega1**2) - math.log(hyper.omega1)
    l0 = log_spike - sig * sig / (2.0 * hyper.omega2**2) - math.log(hyper.omega2)
    return expit(l1 - l0)


def update_z(state: ChainState, hyper: Hyperparameters, rng):
    """Step 10: Bernoulli refresh of the symmetric confounding indicators."""
    latent = state.latent
    sigma = state.params.sigma_star
    p = sigma.shape[0]
    iu = np.triu_indices(p, 1)
    draws = sample_bernoulli(confounding_probability(sigma[iu], hyper), rng)
    latent.z[iu] = draws
    latent.z.T[iu] = draws


def update_sigma_star(state: ChainState, stats: SummaryStatistics, hyper: Hyperparameters, rng):
    """Step 11: column-wise blocked Gibbs draw of the error covariance.

    Each column is repartitioned into (u, v); u gets a Gaussian draw whose
    precision mixes the scatter matrix with the spike-and-slab prior
    variances, and v a GIG draw.  Reassembly through the Schur complement
    keeps Sigma* positive definite whenever v > 0.
    """
    params, latent = state.params, state.latent
    p = params.p
    n = stats.dims.n
    lam = hyper.lam
    scatter = residual_scatter(params, stats, hyper.tau_c)
    sigma = params.sigma_star
    order = 1.0 - n / 2.0

    if p == 1:
        quad = max(float(scatter[0, 0]), GIG_QUAD_FLOOR)
        sigma[0, 0] = sample_gig(GigParams(order, lam, quad), rng)
        state.log_lik = log_likelihood_summary(params, stats)
        return

    for j, (rest, mesh) in enumerate(_column_partitions(p)):
        sig11 = sigma[mesh]
        chol11 = _chol_lower(sig11)
        if chol11 is None:
            raise NumericalError("Sigma* submatrix lost positive definiteness")
        inv11 = _chol_inverse(chol11)
        sig12 = sigma[rest, j]
        s11 = scatter[mesh]
        s12 = scatter[rest, j]
        s22 = float(scatter[j, j])

        v_cur = max(float(sigma[j, j] - sig12 @ inv11 @ sig12), GIG_QUAD_FLOOR)
        v_prior = np.where(latent.z[rest, j] == 1, hyper.omega1**2, hyper.omega2**2)
        inv11_s11_inv11 = inv11 @ s11 @ inv11
        u_prec = inv11_s11_inv11 / v_cur + lam * inv11 + np.diag(1.0 / v_prior)
        chol_prec = _chol_lower(0.5 * (u_prec + u_prec.T))
        if chol_prec is None:
            raise NumericalError("error-covariance column precision is not positive definite")
        w = inv11 @ s12 / v_cur
        mean_u = scipy.linalg.cho_solve((chol_prec, True), w, check_finite=False)
        noise = scipy.linalg.solve_triangular(
            chol_prec, rng.standard_normal(p - 1), lower=True, trans="T", check_finite=False
        )
        u = mean_u + noise

        quad = float(u @ inv11_s11_inv11 @ u - 2.0 * (s12 @ inv11 @ u) + s22)
        if quad <= GIG_QUAD_FLOOR:
            logger.warning("GIG quadratic argument %.3e clamped to floor", quad)
            quad = GIG_QUAD_FLOOR
        v_new = sample_gig(GigParams(order, lam, quad), rng)

        sigma[rest, j] = u
        sigma[j, rest] = u
        sigma[j, j] = v_new + float(u @ inv11 @ u)

    if _chol_lower(sigma) is None:
        raise NumericalError("Sigma* is not positive definite after the blocked Gibbs sweep")
    state.log_lik = log_likelihood_summary(params, stats)


def initial_state(stats: SummaryStatistics, hyper: Hyperparameters, fixed_b_support=None) -> ChainState:
    """Deterministic starting point inside the support with finite likelihood.

    A and C start at zero; B starts at a per-equation ridge regression on
    its support columns in fixed-map mode and at zero in selection mode;
    Sigma* starts as the diagonal of the per-trait residual second moments.
    """
    dims = stats.dims
    p, k, l = dims.p, dims.k, dims.l
    b0 = np.zeros((p, k))
    if hyper.instrument_mode == FIXED_MAP:
        support = np.asarray(fixed_b_support, dtype=int)
        if support.shape != (p, k):
            raise ValueError(f"fixed_b_support has shape {support.shape}, expected {(p, k)}")
        for j in range(p):
            cols = np.flatnonzero(support[j])
            if cols.size:
                gram = stats.s_xx[np.ix_(cols, cols)] + 1e-3 * np.eye(cols.size)
                b0[j, cols] = np.linalg.solve(gram, stats.s_yx[j, cols])
        phi0 = support.copy()
    else:
        phi0 = np.ones((p, k), dtype=int)

    params = ModelParameters(a=np.zeros((p, p)), b=b0, c=np.zeros((p, l)), sigma_star=np.eye(p))
    scatter0 = residual_scatter(params, stats, hyper.tau_c) / dims.n
    params.sigma_star = np.diag(np.maximum(np.diag(scatter0), 1e-8))

    latent = LatentState(
        gamma=(1 - np.eye(p, dtype=int)),
        rho=np.full((p, p), 0.5),
        tau=np.ones((p, p)),
        phi=phi0,
        psi=np.full((p, k), 0.5),
        eta=np.ones((p, k)),
        z=np.ones((p, p), dtype=int),
        aux_a=np.ones((p, p)),
        aux_b=np.ones((p, k)),
    )
    log_lik = log_likelihood_summary(params, stats)
    if not math.isfinite(log_lik):
        raise NumericalError("non-finite log-likelihood at initialization")
    return ChainState(params=params, latent=latent, log_lik=log_lik)


def mcmc_sweep(state, stats, hyper, rng, xi_a=None, xi_b=None):
    """One full pass over the eleven updates; returns MH acceptance counts."""
    selection = hyper.instrument_mode == SELECTION
    if selection:
        update_psi(state, hyper, rng)
        update_eta(state, hyper, rng)
        update_phi(state, hyper, rng)
    acc_b, tot_b = update_b(state, stats, hyper, rng, xi=xi_b)
    update_rho(state, hyper, rng)
    update_tau(state, hyper, rng)
    update_gamma(state, hyper, rng)
    acc_a, tot_a = update_a(state, stats, hyper, rng, xi=xi_a)
    update_c(state, stats, hyper, rng)
    update_z(state, hyper, rng)
    update_sigma_star(state, stats, hyper, rng)
    return acc_a, tot_a, acc_b, tot_b


def run_chain(stats: SummaryStatistics, config: McmcConfig) -> Chain:
    """Run the full kernel and collect thinned post-burn-in samples.

    Fully deterministic given config.seed.  The cached log-likelihood is
    recomputed from scratch every 1000 iterations and must agree with the
    incrementally maintained value to 1e-8 relative.
    """
    config.validate()
    hyper = config.hyper
    stats.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    state = initial_state(stats, hyper, config.fixed_b_support)
    p, k, l = stats.dims.p, stats.dims.k, stats.dims.l

    n_keep = -(-(config.iterations - config.burn_in) // config.thin)
    kept = {
        "a": np.empty((n_keep, p, p)),
        "b": np.empty((n_keep, p, k)),
        "c": np.empty((n_keep, p, l)),
        "sigma_star": np.empty((n_keep, p, p)),
        "gamma": np.empty((n_keep, p, p), dtype=np.int8),
        "phi": np.empty((n_keep, p, k), dtype=np.int8),
        "z": np.empty((n_keep, p, p), dtype=np.int8),
    }
    loglik = np.empty(config.iterations)
    min_eig = np.empty(config.iterations)

    xi_a, xi_b = hyper.xi_a, hyper.xi_b
    acc_a_post = tot_a_post = acc_b_post = tot_b_post = 0
    stored = 0

    for it in range(1, config.iterations + 1):
        acc_a, tot_a, acc_b, tot_b = mcmc_sweep(state, stats, hyper, rng, xi_a=xi_a, xi_b=xi_b)
        state.iteration = it

        in_burn_in = it <= config.burn_in
        if config.adapt_proposals and in_burn_in:
            step = 1.0 / it**0.6
            if tot_a:
                xi_a = min(max(xi_a * math.exp(step * (acc_a / tot_a - ADAPT_TARGET)), 1e-12), 1e4)
            if tot_b:
                xi_b = min(max(xi_b * math.exp(step * (acc_b / tot_b - ADAPT_TARGET)), 1e-12), 1e4)
        if not in_burn_in:
            acc_a_post += acc_a
            tot_a_post += tot_a
            acc_b_post += acc_b
            tot_b_post += tot_b

        loglik[it - 1] = state.log_lik
        min_eig[it - 1] = float(np.linalg.eigvalsh(state.params.sigma_star).min())

        if it % 1000 == 0:
            fresh = log_likelihood_summary(state.params, stats)
            if abs(fresh - state.log_lik) > 1e-8 * max(1.0, abs(fresh)):
                raise NumericalError(
                    f"cached log-likelihood diverged at iteration {it}: cached {state.log_lik!r}, fresh {fresh!r}"
                )
            state.log_lik = fresh

        if not in_burn_in and (it - config.burn_in - 1) % config.thin == 0:
            kept["a"][stored] = state.params.a
            kept["b"][stored] = state.params.b
            kept["c"][stored] = state.params.c
            kept["sigma_star"][stored] = state.params.sigma_star
            kept["gamma"][stored] = state.latent.gamma
            kept["phi"][stored] = state.latent.phi
            kept["z"][stored] = state.latent.z
            stored += 1

    return Chain(
        a=kept["a"][:stored],
        b=kept["b"][:stored],
        c=kept["c"][:stored],
        sigma_star=kept["sigma_star"][:stored],
        gamma=kept["gamma"][:stored],
        phi=kept["phi"][:stored],
        z=kept["z"][:stored],
        loglik=loglik,
        sigma_min_eig=min_eig,
        accept_rate_a=acc_a_post / tot_a_post if tot_a_post else float("nan"),
        accept_rate_b=acc_b_post / tot_b_post if tot_b_post else float("nan"),
        xi_a=xi_a,
        xi_b=xi_b,
        config=dataclasses.replace(config),
    )
