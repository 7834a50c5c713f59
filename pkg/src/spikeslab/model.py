"""Exact densities of the sparsified-likelihood posterior and the 2^p oracle.

The posterior couples a Gaussian likelihood evaluated on the active columns
only with a coordinatewise Gaussian spike/slab mixture:

    pi(beta, z | y) ~ N(y; X_z beta_z, sigma^2 I)
                      * prod_j [q N(beta_j; 0, tau1^2)]^{z_j}
                               [(1-q) N(beta_j; 0, tau0^2)]^{1-z_j}

Marginalizing beta for a fixed model z gives, up to a z-independent constant,

    log pi(z|y) = |z| log(q/(1-q))
                  - y^T (I + tau1^2/sigma^2 X_z X_z^T)^{-1} y / (2 sigma^2)
                  - log det(I + tau1^2/sigma^2 X_z X_z^T) / 2

which is evaluated through the |z| x |z| inner matrix whenever |z| < n.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .types import (
    Dataset,
    DimensionError,
    EnumerationGuardError,
    JointState,
    ModelIndicator,
    PosteriorTable,
    Prior,
)

_LOG_2PI = float(np.log(2.0 * np.pi))


def log_joint_density(state: JointState, data: Dataset, prior: Prior) -> float:
    """Fully normalized log pi(beta, z | y) up to the overall evidence constant.

    All Gaussian normalization constants are included, so differences of this
    function across states are exact log posterior-density ratios.
    """
    if state.z.p != data.p:
        raise DimensionError(f"state has p={state.z.p}, data has p={data.p}")
    beta, z = state.beta, state.z
    active = z.active()
    resid = data.y - data.X[:, active] @ beta[active]
    ll = -0.5 * data.n * (_LOG_2PI + 2.0 * np.log(prior.sigma))
    ll -= resid @ resid / (2.0 * prior.sigma**2)

    zb = z.bits.astype(np.float64)
    slab = np.log(prior.q) - 0.5 * _LOG_2PI - np.log(prior.tau1) - beta**2 / (2.0 * prior.tau1**2)
    spike = (
        np.log1p(-prior.q) - 0.5 * _LOG_2PI - np.log(prior.tau0) - beta**2 / (2.0 * prior.tau0**2)
    )
    return float(ll + np.sum(zb * slab + (1.0 - zb) * spike))


def _inner_chol(active_gram: np.ndarray, c: float):
    """Cholesky of I_k + c * X_z^T X_z (the Woodbury inner matrix)."""
    k = active_gram.shape[0]
    return cho_factor(np.eye(k) + c * active_gram, lower=True)


def model_marginal_log(z: ModelIndicator, data: Dataset, prior: Prior, dense: bool = False) -> float:
    """Unnormalized log pi(z | y); z-independent constants dropped.

    Uses the Woodbury form on the |z| x |z| inner matrix when |z| < n; the
    dense n x n path (``dense=True``, also taken automatically for |z| >= n)
    exists for cross-checking.  An all-zero z reduces to the prior term plus
    -||y||^2/(2 sigma^2) through the empty-matrix conventions (det of a
    0 x 0 matrix is 1), with no special-casing.
    """
    if z.p != data.p:
        raise DimensionError(f"z has p={z.p}, data has p={data.p}")
    sig2 = prior.sigma**2
    c = prior.tau1**2 / sig2
    active = z.active()
    k = active.size
    y = data.y

    if dense or k >= data.n:
        Xa = data.X[:, active]
        M = np.eye(data.n) + c * (Xa @ Xa.T)
        cf = cho_factor(M, lower=True)
        quad = float(y @ cho_solve(cf, y))
        logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))
    else:
        # y^T M^{-1} y = ||y||^2 - c * (X_z^T y)^T (I + c X_z^T X_z)^{-1} (X_z^T y)
        gram = data.xtx[np.ix_(active, active)]
        g = data.xty[active]
        cf = _inner_chol(gram, c)
        quad = float(y @ y - c * (g @ cho_solve(cf, g)))
        logdet = 2.0 * float(np.sum(np.log(np.diag(cf[0]))))

    return float(k * prior.log_odds - 0.5 * quad / sig2 - 0.5 * logdet)


def model_ratio_log(
    z1: ModelIndicator, z2: ModelIndicator, data: Dataset, prior: Prior
) -> float:
    """log pi(z2|y) - log pi(z1|y) for nested z1 subset of z2, via the low-rank update.

    With A = I + tau1^2/sigma^2 X_{z1} X_{z1}^T and J the columns added by z2:

        log ratio = d log(q/(1-q)) - log det(I_d + c X_J^T A^{-1} X_J)/2
                    + y^T A^{-1} X_J (sigma^2/tau1^2 I + X_J^T A^{-1} X_J)^{-1}
                      X_J^T A^{-1} y / (2 sigma^2)

    A^{-1} is itself applied in Woodbury form, so nothing n x n is formed.
    """
    if not z1.issubset(z2):
        raise ValueError("model_ratio_log requires z1 subset of z2")
    added = np.flatnonzero((z2.bits == 1) & (z1.bits == 0))
    d = added.size
    if d == 0:
        return 0.0

    sig2 = prior.sigma**2
    c = prior.tau1**2 / sig2
    base = z1.active()
    XJ = data.X[:, added]

    if base.size == 0:
        AinvXJ = XJ
        Ainvy = data.y
    else:
        gram = data.xtx[np.ix_(base, base)]
        cf = _inner_chol(gram, c)
        Xb = data.X[:, base]
        # A^{-1} v = v - c X_b (I + c X_b^T X_b)^{-1} X_b^T v
        AinvXJ = XJ - c * (Xb @ cho_solve(cf, data.xtx[np.ix_(base, added)]))
        Ainvy = data.y - c * (Xb @ cho_solve(cf, data.xty[base]))

    inner = XJ.T @ AinvXJ
    w = XJ.T @ Ainvy
    cf_small = cho_factor(np.eye(d) + c * inner, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.diag(cf_small[0]))))
    cf_shift = cho_factor(np.eye(d) / c + inner, lower=True)
    quad = float(w @ cho_solve(cf_shift, w))
    return float(d * prior.log_odds - 0.5 * logdet + 0.5 * quad / sig2)


def enumerate_posterior(data: Dataset, prior: Prior, p_max: int = 16) -> PosteriorTable:
    """Brute-force normalized model posterior over all 2^p indicators.

    Refuses p > p_max (cost guard; 2^16 model evaluations is the desk-scale
    ceiling).  All operations here are pure, so callers may share the result
    freely across threads.
    """
    p = data.p
    if p > p_max:
        raise EnumerationGuardError(
            f"enumeration over 2^{p} models exceeds the p_max={p_max} guard"
        )
    models = [ModelIndicator.from_int(p, code) for code in range(1 << p)]
    logs = np.array([model_marginal_log(z, data, prior) for z in models])
    log_norm = float(logsumexp(logs))
    probs = np.exp(logs - log_norm)
    probs /= probs.sum()
    return PosteriorTable(dict(zip(models, probs)), log_norm)


class ActiveGaussian(NamedTuple):
    """Active-block conditional pi(beta_z | z, y) = N(mean, sigma^2 Sigma^{-1}).

    ``chol`` is the lower Cholesky factor of Sigma = X_z^T X_z +
    (sigma^2/tau1^2) I.  Inactive coordinates are implicitly independent
    N(0, tau0^2); they are not represented here.
    """

    mean: np.ndarray
    chol: np.ndarray
    active: np.ndarray


def beta_conditional_params(z: ModelIndicator, data: Dataset, prior: Prior) -> ActiveGaussian:
    """Gaussian parameters of the active block of pi(beta | z, y)."""
    active = z.active()
    k = active.size
    sig2 = prior.sigma**2
    Sigma = data.xtx[np.ix_(active, active)] + (sig2 / prior.tau1**2) * np.eye(k)
    L = np.linalg.cholesky(Sigma)
    g = data.xty[active]
    mean = cho_solve((L, True), g)
    return ActiveGaussian(mean=mean, chol=L, active=active)
