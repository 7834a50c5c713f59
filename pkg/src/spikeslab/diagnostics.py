"""Sampler-output diagnostics: TV on models, W2, ESS, contraction reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import beta_conditional_params, enumerate_posterior
from .types import Dataset, ModelIndicator, PosteriorTable, Prior


def _as_bit_rows(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return samples.astype(np.uint8, copy=False)
    return np.array([z.bits for z in samples], dtype=np.uint8)


def empirical_model_freqs(samples) -> dict:
    rows = _as_bit_rows(samples)
    counts: dict = {}
    for row in rows:
        key = ModelIndicator(row)
        counts[key] = counts.get(key, 0) + 1
    m = rows.shape[0]
    return {z: c / m for z, c in counts.items()}


def z_tv(samples, table: PosteriorTable) -> float:
    """Total variation between the empirical model frequencies and the table:
    half the L1 distance over the union of supports.  In [0, 1]."""
    freqs = empirical_model_freqs(samples)
    keys = set(freqs) | set(table.entries)
    return 0.5 * sum(abs(freqs.get(z, 0.0) - table.prob(z)) for z in keys)


def table_tv(a: PosteriorTable, b: PosteriorTable) -> float:
    keys = set(a.entries) | set(b.entries)
    return 0.5 * sum(abs(a.prob(z) - b.prob(z)) for z in keys)


def inclusion_probs(samples) -> np.ndarray:
    """Coordinatewise active fractions of a model sample stream."""
    return _as_bit_rows(samples).mean(axis=0)


def threshold_models(outputs: np.ndarray, threshold: float) -> np.ndarray:
    """Map continuous sampler outputs to models: active iff |out_j| > threshold.

    A continuous spike never returns exact zeros, so variable selection from
    localization outputs needs this cut; the conventional level is half the
    detection threshold sigma sqrt(log p / n).
    """
    return (np.abs(outputs) > threshold).astype(np.uint8)


def detection_threshold(n: int, p: int, sigma: float) -> float:
    return sigma * np.sqrt(np.log(p) / n)


def sl_inclusion_threshold(data: Dataset, prior: Prior, c: float = 2.0) -> float:
    """Coordinate cut for calling a continuous draw active.

    Uses the prior's own classification boundary: the |beta| where
    q N(beta; 0, tau1^2) overtakes (1-q) N(beta; 0, tau0^2).  The cut then
    clears the spike scale by construction (exact posterior draws of
    inactive coordinates live at scale tau0 and would trip any lower cut),
    and it needs no planted truth.  Falls back to half the c-scaled
    detection bound in the degenerate case where the densities never cross.
    """
    log_odds_gap = np.log1p(-prior.q) - np.log(prior.q) + np.log(prior.tau1) - np.log(prior.tau0)
    prec_gap = 1.0 / prior.tau0**2 - 1.0 / prior.tau1**2
    if log_odds_gap > 0 and prec_gap > 0:
        return float(np.sqrt(2.0 * log_odds_gap / prec_gap))
    return 0.5 * c * detection_threshold(data.n, data.p, prior.sigma)


def w2_1d(a: np.ndarray, b: np.ndarray) -> float:
    """1-d Wasserstein-2 by the order-statistics coupling.

    Unequal lengths are compared on a common quantile grid of the shorter
    size (deterministic, no subsampling randomness).
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.shape[0] != b.shape[0]:
        m = min(a.shape[0], b.shape[0])
        grid = (np.arange(m) + 0.5) / m
        a = np.quantile(a, grid)
        b = np.quantile(b, grid)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def w2_exact(a: np.ndarray, b: np.ndarray, max_points: int = 512) -> float:
    """Multivariate W2 between two equal-size point clouds by exact assignment.

    Desk-scale only: refuses more than ``max_points`` pairs (the assignment
    is cubic); use :func:`sliced_w2` beyond that.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if a.shape != b.shape:
        raise ValueError("w2_exact needs equally many points of equal dimension")
    if a.shape[0] > max_points:
        raise ValueError(f"w2_exact capped at {max_points} points; use sliced_w2")
    cost = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


def sliced_w2(
    a: np.ndarray, b: np.ndarray, n_dirs: int = 64, rng: Optional[np.random.Generator] = None
) -> float:
    """Root-mean of squared 1-d W2 over random projection directions."""
    if rng is None:
        rng = np.random.default_rng(0)
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    p = a.shape[1]
    total = 0.0
    for _ in range(n_dirs):
        u = rng.standard_normal(p)
        u /= np.linalg.norm(u)
        total += w2_1d(a @ u, b @ u) ** 2
    return float(np.sqrt(total / n_dirs))


def _sqrtm_psd(M: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(M)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def gaussian_w2(mean_a, cov_a, mean_b, cov_b) -> float:
    """Closed-form W2 between two Gaussians (Bures metric on covariances).

    The sharp tool when both laws are Gaussian or nearly so: estimating
    moments from a few thousand samples resolves distances far below the
    m^{-1/4} bias floor of empirical point-cloud W2.
    """
    mean_a, mean_b = np.asarray(mean_a), np.asarray(mean_b)
    root_a = _sqrtm_psd(np.asarray(cov_a))
    cross = _sqrtm_psd(root_a @ np.asarray(cov_b) @ root_a)
    gap = float(
        np.sum((mean_a - mean_b) ** 2)
        + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross)
    )
    return float(np.sqrt(max(gap, 0.0)))


def ess(series: np.ndarray) -> float:
    """Effective sample size by the initial-monotone-sequence truncation.

    Pairs consecutive autocorrelations, truncates at the first non-positive
    pair sum, enforces monotone decrease, and returns N / (2 sum - 1).
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.shape[0]
    if n < 4:
        return float(n)
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / var

    gammas = []
    m = 0
    while 2 * m + 1 < n:
        g = rho[2 * m] + rho[2 * m + 1]
        if g <= 0.0:
            break
        gammas.append(g)
        m += 1
    for i in range(1, len(gammas)):
        gammas[i] = min(gammas[i], gammas[i - 1])
    tau = max(2.0 * sum(gammas) - 1.0, 1e-12)
    return float(n / tau)


@dataclass
class ContractionRow:
    seed: int
    prob_true_model: float
    oversize_mass: float
    ball_mass: float
    exhaustive: bool


@dataclass
class ContractionReport:
    rows: list
    mean_prob_true: float
    se_prob_true: float
    mean_oversize: float
    mean_ball: float

    def frac_above(self, level: float) -> float:
        return float(np.mean([r.prob_true_model >= level for r in self.rows]))

    def long_rows(self) -> list:
        """(seed, metric, value) triples, one metric per line (plot-ready)."""
        out = []
        for r in self.rows:
            out.append((r.seed, "prob_true_model", r.prob_true_model))
            out.append((r.seed, "oversize_mass", r.oversize_mass))
            out.append((r.seed, "ball_mass", r.ball_mass))
        return out

    def summary_text(self) -> str:
        return (
            f"replications={len(self.rows)} "
            f"mean pi(z*|y)={self.mean_prob_true:.4f} (se {self.se_prob_true:.4f}) "
            f"mean oversize={self.mean_oversize:.4f} mean ball={self.mean_ball:.4f}"
        )


def restricted_table(
    data: Dataset, prior: Prior, pool: Sequence[int], max_size: Optional[int] = None
) -> PosteriorTable:
    """Model posterior renormalized over all subsets of a candidate pool.

    Stand-in for full enumeration when p is large but the mass provably
    concentrates near a small pool (for example the Lasso support plus the
    top marginal-correlation columns).
    """
    from itertools import combinations

    from scipy.special import logsumexp

    from .model import model_marginal_log

    pool = sorted(set(int(j) for j in pool))
    if max_size is None:
        max_size = len(pool)
    models, logs = [], []
    for r in range(min(max_size, len(pool)) + 1):
        for combo in combinations(pool, r):
            z = ModelIndicator.from_support(data.p, combo)
            models.append(z)
            logs.append(model_marginal_log(z, data, prior))
    logs = np.array(logs)
    log_norm = float(logsumexp(logs))
    probs = np.exp(logs - log_norm)
    probs /= probs.sum()
    return PosteriorTable(dict(zip(models, probs)), log_norm)


def contraction_metrics(
    data: Dataset,
    prior: Prior,
    table: PosteriorTable,
    omega: float,
    size_cap: Optional[int] = None,
    ball_draws: int = 64,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, float, float]:
    """(pi(z*|y), oversize mass, mass in the contraction ball B).

    B keeps beta whose active part sits within sigma sqrt(k log p)/(sqrt(n)
    omega) of beta* and whose off-model part is within tau0 sqrt(p) (both
    with constant 1, by convention).  The ball mass is estimated by exact
    conditional Gaussian draws per model, weighted by the table.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    k = data.z_star.active_count
    if size_cap is None:
        size_cap = int(np.ceil(k * (1.0 + 1.0 / prior.delta)))
    prob_true = table.prob(data.z_star)
    oversize = sum(pr for z, pr in table.items() if z.active_count > size_cap)

    r_active = prior.sigma * np.sqrt(max(k, 1) * np.log(data.p)) / (np.sqrt(data.n) * omega)
    r_rest = prior.tau0 * np.sqrt(data.p)
    ball = 0.0
    for z, pr in table.items():
        if pr < 1e-6:
            continue
        act = z.active()
        inact = z.inactive()
        draws = np.zeros((ball_draws, data.p))
        if act.size:
            params = beta_conditional_params(z, data, prior)
            noise = rng.standard_normal((ball_draws, act.size))
            from scipy.linalg import solve_triangular

            dev = solve_triangular(params.chol.T, noise.T, lower=False).T * prior.sigma
            draws[:, act] = params.mean + dev
        if inact.size:
            draws[:, inact] = prior.tau0 * rng.standard_normal((ball_draws, inact.size))
        bz = np.zeros((ball_draws, data.p))
        bz[:, act] = draws[:, act]
        ok_active = np.linalg.norm(bz - data.beta_star, axis=1) <= r_active
        ok_rest = np.linalg.norm(draws - bz, axis=1) <= r_rest
        ball += pr * float(np.mean(ok_active & ok_rest))
    return float(prob_true), float(oversize), float(ball)


def contraction_report(rows: Sequence[ContractionRow]) -> ContractionReport:
    probs = np.array([r.prob_true_model for r in rows])
    return ContractionReport(
        rows=list(rows),
        mean_prob_true=float(probs.mean()),
        se_prob_true=float(probs.std(ddof=1) / np.sqrt(len(rows))) if len(rows) > 1 else 0.0,
        mean_oversize=float(np.mean([r.oversize_mass for r in rows])),
        mean_ball=float(np.mean([r.ball_mass for r in rows])),
    )


def oracle_table(data: Dataset, prior: Prior, p_max: int = 16) -> PosteriorTable:
    """Convenience re-export of the enumeration oracle."""
    return enumerate_posterior(data, prior, p_max=p_max)
