"""Spike-and-slab logistic regression by Polya-Gamma data augmentation.

Each sweep alternates three blocks:

* omega_i | beta, z  ~  PG(1, x_{i,z}^T beta_z), independently across rows;
* active beta | z, omega, y  ~  N(Sigma^{-1} Xbar^T (y - 1/2), Sigma^{-1})
  with Sigma = Xbar^T D(omega) Xbar + I/tau1^2, inactive beta_j ~ N(0, tau0^2);
* z_j | rest sequentially, with the same site-logit structure as the linear
  module after substituting X^T D(omega) X for X^T X, X^T (y - 1/2) for
  X^T y, and sigma = 1 (the augmented likelihood has no noise scale, so
  Prior.sigma is ignored here).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import kernels
from .gibbs import GibbsConfig
from .types import Dataset, ModelIndicator, Prior


@dataclass
class LogisticState:
    beta: np.ndarray
    z: ModelIndicator
    omega: np.ndarray

    def __post_init__(self):
        self.beta = np.ascontiguousarray(self.beta, dtype=np.float64)
        self.omega = np.ascontiguousarray(self.omega, dtype=np.float64)
        if np.any(self.omega <= 0):
            raise ValueError("all omega_i must be positive")


def pg_sample(c: float, rng: np.random.Generator) -> float:
    """Exact draw from PG(1, |c|)."""
    return kernels.pg_draw(float(c), rng)


def logistic_log_joint(state: LogisticState, data: Dataset, prior: Prior) -> float:
    """Log of the augmented joint, dropping the omega base-measure factor.

    Per row the quasi-likelihood contributes (y_i - 1/2) psi_i
    - omega_i psi_i^2 / 2 with psi = x_{i,z}^T beta_z; adding the z/beta
    prior terms gives everything that varies with (beta, z), which is all
    the site updates need.
    """
    active = state.z.active()
    psi = data.X[:, active] @ state.beta[active]
    ll = float((data.y - 0.5) @ psi - 0.5 * state.omega @ (psi * psi))
    zb = state.z.bits.astype(np.float64)
    slab = np.log(prior.q) - np.log(prior.tau1) - state.beta**2 / (2 * prior.tau1**2)
    spike = np.log1p(-prior.q) - np.log(prior.tau0) - state.beta**2 / (2 * prior.tau0**2)
    return ll + float(np.sum(zb * slab + (1 - zb) * spike))


def logistic_z_site_logit(j: int, state: LogisticState, data: Dataset, prior: Prior) -> float:
    """Log odds of z_j = 1 vs 0 given beta, omega and the other sites."""
    beta = state.beta
    bj = float(beta[j])
    masked = beta * state.z.bits
    masked[j] = 0.0
    wX = data.X * state.omega[:, None]
    gj = data.X[:, j] @ wX  # row j of X^T D(omega) X
    cross = float(gj @ masked)
    b_j = float(data.X[:, j] @ (data.y - 0.5))
    c0 = prior.log_odds + np.log(prior.tau0) - np.log(prior.tau1)
    a_quad = 0.5 * (1.0 / prior.tau0**2 - 1.0 / prior.tau1**2)
    return float(c0 + a_quad * bj * bj + bj * b_j - bj * cross - 0.5 * bj * bj * float(gj[j]))


def logistic_gibbs_sweep(
    state: LogisticState, data: Dataset, prior: Prior, rng: np.random.Generator
) -> LogisticState:
    """One full sweep: omega block, beta block, then the sequential z scan."""
    if not np.all((data.y == 0) | (data.y == 1)):
        raise ValueError("logistic responses must be binary 0/1")
    z = state.z
    active = z.active()

    # omega | beta, z : independent PG(1, psi_i) draws, one per row
    psi = data.X[:, active] @ state.beta[active]
    omega = kernels.pg_draws(psi, rng)

    # beta | z, omega, y
    beta = np.empty(data.p)
    if active.size:
        Xa = data.X[:, active]
        Sigma = Xa.T @ (Xa * omega[:, None]) + np.eye(active.size) / prior.tau1**2
        L = np.linalg.cholesky(Sigma)
        mean = cho_solve((L, True), Xa.T @ (data.y - 0.5))
        beta[active] = mean + solve_triangular(
            L.T, rng.standard_normal(active.size), lower=False
        )
    inactive = z.inactive()
    if inactive.size:
        beta[inactive] = prior.tau0 * rng.standard_normal(inactive.size)

    # z scan on the omega-weighted Gram matrix, sigma fixed at 1
    gram = data.X.T @ (data.X * omega[:, None])
    gram = 0.5 * (gram + gram.T)
    b = data.X.T @ (data.y - 0.5)
    zbits = z.bits.copy()
    s = gram @ (beta * zbits)
    order = np.arange(data.p, dtype=np.int64)
    c0 = prior.log_odds + np.log(prior.tau0) - np.log(prior.tau1)
    a_quad = 0.5 * (1.0 / prior.tau0**2 - 1.0 / prior.tau1**2)
    kernels.z_scan(gram, b, beta, zbits, s, float(c0), float(a_quad), 1.0, order, rng)
    return LogisticState(beta, ModelIndicator(zbits), omega)


@dataclass
class LogisticRun:
    sweeps: np.ndarray
    z_bits: np.ndarray
    beta: np.ndarray
    omega: Optional[np.ndarray]
    wall_time: float
    meta: dict = field(default_factory=dict)


def logistic_gibbs_run(
    data: Dataset,
    prior: Prior,
    config: GibbsConfig,
    init: Optional[LogisticState] = None,
    rng: Optional[np.random.Generator] = None,
    keep_omega: bool = False,
) -> LogisticRun:
    """Drive the three-block chain; emission schedule as in gibbs_run."""
    if prior.sigma != 1.0:
        warnings.warn(
            "the augmented logistic likelihood has no noise scale; Prior.sigma is ignored",
            stacklevel=2,
        )
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if init is None:
        init = LogisticState(np.zeros(data.p), ModelIndicator.zeros(data.p), np.full(data.n, 0.25))
    state = init
    m = config.n_emitted
    out_sweeps = np.empty(m, dtype=np.int64)
    out_z = np.empty((m, data.p), dtype=np.uint8)
    out_beta = np.empty((m, data.p))
    out_omega = np.empty((m, data.n)) if keep_omega else None
    t0 = time.perf_counter()
    k = 0
    for sweep in range(1, config.sweeps + 1):
        state = logistic_gibbs_sweep(state, data, prior, rng)
        if sweep > config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            out_sweeps[k] = sweep
            out_z[k] = state.z.bits
            out_beta[k] = state.beta
            if keep_omega:
                out_omega[k] = state.omega
            k += 1
    return LogisticRun(
        sweeps=out_sweeps[:k],
        z_bits=out_z[:k],
        beta=out_beta[:k],
        omega=out_omega[:k] if keep_omega else None,
        wall_time=time.perf_counter() - t0,
        meta={"seed": config.seed},
    )
