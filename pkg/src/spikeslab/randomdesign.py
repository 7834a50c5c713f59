"""Integrated-design posterior and its Gibbs sampler.

Averaging the Gaussian likelihood over an i.i.d. standard normal design
matrix leaves a posterior that depends on the data only through y:

    pi(beta, z | y) ~ sigma^n / (||beta||^2 + sigma^2)^{n/2}
                      * exp( ||y||^2 ||beta||^2 / (2 sigma^4 + 2 sigma^2 ||beta||^2) )
                      * prod_j [(1-q)/tau0 e^{-beta_j^2/2tau0^2}]^{1-z_j}
                               [q/tau1 e^{-beta_j^2/2tau1^2}]^{z_j}

The z block is a product of independent Bernoullis; the beta | z block is
non-log-concave and is sampled by a Schrodinger-bridge SDE from the origin:
the drift steers a Brownian motion so that at time 1 it lands on
f(beta) N(0, gamma I), where f absorbs everything in the target beyond the
reference Gaussian.  The drift is the self-normalized score

    b(x, t) = E_Z[Z f(x + sqrt(1-t) Z)] / (sqrt(1-t) E_Z[f(x + sqrt(1-t) Z)]),

with Z ~ N(0, gamma I), estimated with common random numbers in numerator
and denominator and log-space weights.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from .gibbs import GibbsConfig
from .types import JointState, ModelIndicator, NumericalError, Prior

_T_CLIP = 1.0 - 1e-9  # drift is evaluated strictly inside [0, 1)


@dataclass
class RdTarget:
    """Response, prior, and the reference variance gamma > tau0^2."""

    y: np.ndarray
    prior: Prior
    gamma: Optional[float] = None

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.gamma is None:
            self.gamma = 4.0 * self.prior.tau0**2
        if self.gamma <= self.prior.tau0**2:
            raise ValueError("gamma must exceed tau0^2")
        if self.n <= 2:
            raise ValueError("need n > 2 observations")

    @property
    def n(self) -> int:
        return self.y.shape[0]


def _shape_terms(beta_sq_norm, target: RdTarget):
    """n log sigma - (n/2) log(||b||^2 + s2) + ||y||^2 ||b||^2 / (2 s4 + 2 s2 ||b||^2)."""
    s2 = target.prior.sigma**2
    ynorm2 = float(target.y @ target.y)
    return (
        0.5 * target.n * np.log(s2)
        - 0.5 * target.n * np.log(beta_sq_norm + s2)
        + ynorm2 * beta_sq_norm / (2.0 * s2 * s2 + 2.0 * s2 * beta_sq_norm)
    )


def rd_log_density(beta: np.ndarray, z: ModelIndicator, target: RdTarget) -> float:
    """Unnormalized log pi(beta, z | y); rotationally invariant in the
    likelihood part (it sees beta only through ||beta||)."""
    prior = target.prior
    beta = np.asarray(beta, dtype=np.float64)
    zb = z.bits.astype(np.float64)
    spike = np.log1p(-prior.q) - np.log(prior.tau0) - beta**2 / (2 * prior.tau0**2)
    slab = np.log(prior.q) - np.log(prior.tau1) - beta**2 / (2 * prior.tau1**2)
    return float(_shape_terms(float(beta @ beta), target) + np.sum(zb * slab + (1 - zb) * spike))


def rd_inclusion_probs(beta: np.ndarray, target: RdTarget) -> np.ndarray:
    """Q_j = 1 / (1 + (1-q)/q * tau1/tau0 * exp((1/tau1^2 - 1/tau0^2) beta_j^2 / 2))."""
    prior = target.prior
    L = (
        np.log1p(-prior.q) - np.log(prior.q)
        + np.log(prior.tau1) - np.log(prior.tau0)
        + 0.5 * (1.0 / prior.tau1**2 - 1.0 / prior.tau0**2) * np.asarray(beta) ** 2
    )
    return 1.0 / (1.0 + np.exp(np.clip(L, -700, 700)))


def rd_z_update(beta: np.ndarray, target: RdTarget, rng: np.random.Generator) -> ModelIndicator:
    """z | beta: independent Bernoulli(Q_j) across coordinates."""
    Q = rd_inclusion_probs(beta, target)
    return ModelIndicator((rng.random(Q.shape[0]) < Q).astype(np.uint8))


def rd_log_f(beta: np.ndarray, z: ModelIndicator, target: RdTarget) -> np.ndarray:
    """log f for the bridge: the target divided by the N(0, gamma I) reference.

    Vectorized over rows of beta.  Positive everywhere; gamma > tau0^2
    guarantees the +||beta||^2/(2 gamma) term is dominated by the spike.
    """
    beta = np.atleast_2d(np.asarray(beta, dtype=np.float64))
    d = z.bits / target.prior.tau1**2 + (1 - z.bits) / target.prior.tau0**2
    sq = np.einsum("ij,ij->i", beta, beta)
    out = (
        _shape_terms(sq, target)
        - 0.5 * np.einsum("ij,j,ij->i", beta, d, beta)
        + sq / (2.0 * target.gamma)
    )
    return out


def sb_drift(
    x: np.ndarray,
    t: float,
    log_f: Callable[[np.ndarray], np.ndarray],
    gamma: float,
    mc_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Monte-Carlo Follmer drift at one point x, time t < 1.

    The same S draws of Z ~ N(0, gamma I) feed numerator and denominator
    (common random numbers), weights are combined in log space, and the
    numerator subtracts the center value f(x) as a control variate
    (E[Z c] = 0 for any constant, but the subtraction removes the E[Z]
    noise that otherwise scales like 1/sqrt(1-t)).  Raises if every weight
    underflows.
    """
    if not 0.0 <= t < 1.0:
        raise ValueError("drift is defined for t in [0, 1)")
    if mc_samples < 1:
        raise ValueError("need at least one Monte-Carlo sample")
    x = np.asarray(x, dtype=np.float64)
    Z = np.sqrt(gamma) * rng.standard_normal((mc_samples, x.shape[0]))
    w = np.asarray(log_f(x[None, :] + np.sqrt(1.0 - t) * Z))
    w_center = float(np.asarray(log_f(x[None, :]))[0])
    m = max(float(np.max(w)), w_center)
    if not np.isfinite(m):
        raise NumericalError(
            "all bridge weights underflowed; rescale log_f by a working exponent shift"
        )
    probs = np.exp(w - m)
    denom = float(probs.sum())
    num = (probs - np.exp(w_center - m)) @ Z
    return num / (np.sqrt(1.0 - t) * denom)


def _sb_drift_batch(x, t, z, target, mc_samples, rng):
    """Follmer drift for a (B, p) batch, independent MC draws per row,
    with the same center-value control variate as :func:`sb_drift`."""
    B, p = x.shape
    Z = np.sqrt(target.gamma) * rng.standard_normal((B, mc_samples, p))
    pts = x[:, None, :] + np.sqrt(1.0 - t) * Z
    w = rd_log_f(pts.reshape(B * mc_samples, p), z, target).reshape(B, mc_samples)
    w_center = rd_log_f(x, z, target)[:, None]
    m = np.maximum(w.max(axis=1, keepdims=True), w_center)
    if not np.all(np.isfinite(m)):
        raise NumericalError("all bridge weights underflowed for some path")
    probs = np.exp(w - m)
    denom = probs.sum(axis=1)
    num = np.einsum("bs,bsp->bp", probs - np.exp(w_center - m), Z)
    return num / (np.sqrt(1.0 - t) * denom[:, None])


def sb_em_sample(
    z: ModelIndicator,
    target: RdTarget,
    steps: int,
    mc_samples: int,
    rng: np.random.Generator,
    n_samples: int = 1,
    drift_off: bool = False,
) -> np.ndarray:
    """Euler-Maruyama bridge run over [0, 1]: approximate draws from
    pi(beta | z, y).

    X_{k+1} = X_k + h b(X_k, kh) + sqrt(gamma h) xi_k from X_0 = 0; the final
    step evaluates the drift at t clipped just below 1.  ``drift_off``
    disables the control entirely, leaving plain Brownian motion that lands
    on N(0, gamma I) at time 1 (a useful null check).
    Returns an (n_samples, p) array.
    """
    p = z.p
    h = 1.0 / steps
    x = np.zeros((n_samples, p))
    for k in range(steps):
        t = min(k * h, _T_CLIP)
        if not drift_off:
            x = x + h * _sb_drift_batch(x, t, z, target, mc_samples, rng)
        x = x + np.sqrt(target.gamma * h) * rng.standard_normal((n_samples, p))
    return x


@dataclass
class RdRun:
    sweeps: np.ndarray
    z_bits: np.ndarray
    beta: np.ndarray
    wall_time: float
    meta: dict = field(default_factory=dict)

    def states(self):
        return [JointState(b, ModelIndicator(zb)) for b, zb in zip(self.beta, self.z_bits)]


def rd_gibbs_run(
    target: RdTarget,
    config: GibbsConfig,
    init: JointState,
    rng: Optional[np.random.Generator] = None,
    em_steps: int = 100,
    mc_samples: int = 256,
) -> RdRun:
    """Alternate the parallel z block with one bridge draw of beta | z.

    The initial state fixes the coordinate dimension (the target sees beta
    only through y, so p is free).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    p_dim = init.beta.shape[0]
    state = init
    m = config.n_emitted
    out_sweeps = np.empty(m, dtype=np.int64)
    out_z = np.empty((m, p_dim), dtype=np.uint8)
    out_beta = np.empty((m, p_dim))
    t0 = time.perf_counter()
    k = 0
    for sweep in range(1, config.sweeps + 1):
        z = rd_z_update(state.beta, target, rng)
        beta = sb_em_sample(z, target, em_steps, mc_samples, rng)[0]
        state = JointState(beta, z)
        if sweep > config.burn_in and (sweep - config.burn_in) % config.thin == 0:
            out_sweeps[k] = sweep
            out_z[k] = z.bits
            out_beta[k] = beta
            k += 1
    return RdRun(
        sweeps=out_sweeps[:k],
        z_bits=out_z[:k],
        beta=out_beta[:k],
        wall_time=time.perf_counter() - t0,
        meta={"em_steps": em_steps, "mc_samples": mc_samples},
    )
