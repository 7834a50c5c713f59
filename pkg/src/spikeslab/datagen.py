"""Synthetic instances, prior scaling, Lasso warm starts, design diagnostics.

The parameter-suggestion rule ties the prior to the problem size:
q/(1-q) = p^{-(delta+1)}, tau1 = sigma p / sqrt(n), tau0 = sigma / sqrt(n);
planted signals sit at a multiple of the detection threshold
sigma sqrt(log p / n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np

from .model import beta_conditional_params
from .sloc import WarmStartSet
from .types import ConvergenceError, Dataset, ModelIndicator, Prior


@dataclass
class SyntheticSpec:
    n: int
    p: int
    k: int
    signal_scale: float = 4.0
    design: str = "gaussian_iid"  # gaussian_iid | orthogonal | correlated
    rho: float = 0.0
    corr_pairs: Sequence[tuple[int, int]] = field(default_factory=list)
    normalize_columns: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k > self.p:
            raise ValueError("k must not exceed p")
        if self.signal_scale < 0:
            raise ValueError("signal_scale must be >= 0")
        if self.design not in ("gaussian_iid", "orthogonal", "correlated"):
            raise ValueError(f"unknown design {self.design!r}")
        if self.design == "orthogonal" and self.p > self.n:
            raise ValueError("orthogonal design needs p <= n")


def gen_synthetic(spec: SyntheticSpec, sigma: float = 1.0) -> Dataset:
    """Draw X per the requested design, plant a k-sparse signal, add noise.

    Active coefficients are +-signal_scale * sigma * sqrt(log p / n) with
    random signs on the first k coordinates; correlated designs overwrite
    the listed column pairs with population correlation rho.
    """
    rng = np.random.default_rng(spec.seed)
    n, p = spec.n, spec.p
    if spec.design == "orthogonal":
        Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        X = Q[:, :p]
        if spec.normalize_columns:
            X = X * np.sqrt(n)
    else:
        X = rng.standard_normal((n, p))
        if spec.design == "correlated":
            for i, j in spec.corr_pairs:
                X[:, j] = spec.rho * X[:, i] + np.sqrt(1.0 - spec.rho**2) * X[:, j]
        if spec.normalize_columns:
            X = X * (np.sqrt(n) / np.linalg.norm(X, axis=0))

    support = np.arange(spec.k)
    beta_star = np.zeros(p)
    if spec.k:
        magnitude = spec.signal_scale * sigma * np.sqrt(np.log(p) / n)
        beta_star[support] = magnitude * rng.choice([-1.0, 1.0], size=spec.k)
    z_star = ModelIndicator.from_support(p, support[beta_star[support] != 0.0])
    y = X @ beta_star + sigma * rng.standard_normal(n)
    return Dataset(X=X, y=y, beta_star=beta_star, z_star=z_star)


def suggest_prior(n: int, p: int, sigma: float, delta: float) -> Prior:
    """Non-data-adaptive scaling of (q, tau0, tau1) with the problem size."""
    q = 1.0 / (1.0 + float(p) ** (delta + 1.0))
    return Prior(
        q=q,
        tau0=sigma / np.sqrt(n),
        tau1=sigma * p / np.sqrt(n),
        sigma=sigma,
        delta=delta,
    )


def lasso_fit(
    data: Dataset,
    lam: float,
    tol: float = 1e-8,
    max_passes: int = 10_000,
) -> np.ndarray:
    """Coordinate descent for min_beta ||y - X beta||^2 + lam ||beta||_1.

    Note the un-halved quadratic: the soft-threshold level per coordinate is
    lam/2, not lam.  Stops when the duality gap drops below ``tol``; raises
    ConvergenceError carrying the gap otherwise.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    X, y = data.X, data.y
    p = data.p
    col_sq = np.einsum("ij,ij->j", X, X)
    beta = np.zeros(p)
    r = y.copy()
    for _ in range(max_passes):
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            bj = beta[j]
            rho = X[:, j] @ r + col_sq[j] * bj
            new = np.sign(rho) * max(abs(rho) - 0.5 * lam, 0.0) / col_sq[j]
            if new != bj:
                r += X[:, j] * (bj - new)
                beta[j] = new
        gap = _lasso_gap(X, y, beta, r, lam)
        if gap <= tol:
            return beta
    raise ConvergenceError(
        f"lasso did not reach gap tolerance {tol} in {max_passes} passes", residual=gap
    )


def _lasso_gap(X, y, beta, r, lam):
    """Duality gap of ||y - X beta||^2 + lam ||beta||_1 at the current point.

    Scaled from the standard form (1/2)||.||^2 + (lam/2)||.||_1 whose dual
    point is the residual shrunk into the constraint ||X^T theta||_inf <= lam/2.
    """
    primal_half = 0.5 * float(r @ r) + 0.5 * lam * float(np.sum(np.abs(beta)))
    corr = float(np.max(np.abs(X.T @ r))) if beta.size else 0.0
    scale = 1.0 if corr <= 0.5 * lam or corr == 0.0 else 0.5 * lam / corr
    theta = scale * r
    dual_half = 0.5 * float(y @ y) - 0.5 * float((y - theta) @ (y - theta))
    return 2.0 * (primal_half - dual_half)


def lasso_kkt_residual(data: Dataset, beta: np.ndarray, lam: float) -> float:
    """Worst violation of the subgradient conditions at beta."""
    g = 2.0 * (data.xtx @ beta - data.xty)
    worst = 0.0
    for j in range(data.p):
        if beta[j] > 0:
            worst = max(worst, abs(g[j] + lam))
        elif beta[j] < 0:
            worst = max(worst, abs(g[j] - lam))
        else:
            worst = max(worst, max(abs(g[j]) - lam, 0.0))
    return worst


def support_of(beta: np.ndarray, thresh: float = 1e-10) -> np.ndarray:
    return np.flatnonzero(np.abs(beta) > thresh)


def warm_start(
    data: Dataset,
    prior: Prior,
    lam: float,
    max_extra: int = 2,
    pool_size: int = 8,
    use_truth: bool = False,
) -> tuple["JointState", WarmStartSet]:
    """Lasso-support initialization plus the model set around it.

    The candidate pool for extra coordinates is the Lasso support joined
    with the top ``pool_size`` columns by |X_j^T y|.  ``use_truth`` bypasses
    the estimator and plants the true support as the base.
    """
    from .types import JointState

    if use_truth:
        if not data.has_truth:
            raise ValueError("use_truth requires a dataset with planted truth")
        base = data.z_star
    else:
        base = ModelIndicator.from_support(data.p, support_of(lasso_fit(data, lam)))
    beta = np.zeros(data.p)
    if base.active_count:
        params = beta_conditional_params(base, data, prior)
        beta[params.active] = params.mean
    ranked = np.argsort(-np.abs(data.xty))
    pool = set(base.active().tolist())
    for j in ranked:
        if len(pool) >= base.active_count + pool_size:
            break
        pool.add(int(j))
    S = WarmStartSet.build(base, pool, max_extra)
    return JointState(beta, base), S


@dataclass
class DesignStat:
    value: float
    exhaustive: bool
    argmax: Optional[tuple] = None


def _support_iter(p: int, k: int, pool: Optional[Sequence[Sequence[int]]]):
    if pool is not None:
        for sup in pool:
            yield tuple(sup)
        return
    for size in range(k + 1):
        for combo in combinations(range(p), size):
            yield combo


def _whitened_gram(data: Dataset, prior: Prior, support: tuple) -> np.ndarray:
    """X^T (I + tau1^2/sigma^2 X_z X_z^T)^{-1} X via the Woodbury form."""
    c = prior.tau1**2 / prior.sigma**2
    G = data.xtx
    if not support:
        return G.copy()
    idx = np.asarray(support)
    inner = np.linalg.inv(np.eye(idx.size) / c + G[np.ix_(idx, idx)])
    return G - G[:, idx] @ inner @ G[idx, :]


def coherence(
    data: Dataset,
    prior: Prior,
    k: int,
    support_pool: Optional[Sequence[Sequence[int]]] = None,
) -> DesignStat:
    """C(k) = max over |z| <= k, j != i, j not in z of the whitened
    cross-correlation |X_j^T (I + tau1^2/sigma^2 X_z X_z^T)^{-1} X_i|.

    Exhaustive enumeration only at desk scale (p <= 12, k <= 3 by default);
    otherwise restrict to the supplied support pool and flag it.
    """
    exhaustive = support_pool is None
    if exhaustive and not (data.p <= 12 and k <= 3):
        raise ValueError("exhaustive coherence needs p <= 12 and k <= 3; pass a support_pool")
    best, arg = -np.inf, None
    for sup in _support_iter(data.p, k, support_pool):
        W = np.abs(_whitened_gram(data, prior, sup))
        np.fill_diagonal(W, 0.0)
        W[list(sup), :] = 0.0  # j must lie outside the support
        j, i = np.unravel_index(np.argmax(W), W.shape)
        if W[j, i] > best:
            best, arg = float(W[j, i]), (sup, int(j), int(i))
    return DesignStat(value=best, exhaustive=exhaustive, argmax=arg)


def restricted_eig(
    data: Dataset,
    prior: Prior,
    k: int,
    support_pool: Optional[Sequence[Sequence[int]]] = None,
    v_pool: Optional[Sequence[Sequence[int]]] = None,
) -> DesignStat:
    """omega(k) = min over |z| <= k and k-sparse unit v off the support of
    v^T X_{1-z}^T (I + tau1^2/sigma^2 X_z X_z^T)^{-1} X_{1-z} v.

    Evaluated per (z, supp(v)) pair as the smallest eigenvalue of the
    corresponding principal submatrix.
    """
    exhaustive = support_pool is None and v_pool is None
    if exhaustive and not (data.p <= 12 and k <= 3):
        raise ValueError("exhaustive restricted_eig needs p <= 12 and k <= 3; pass pools")
    best, arg = np.inf, None
    for sup in _support_iter(data.p, k, support_pool):
        W = _whitened_gram(data, prior, sup)
        outside = [j for j in range(data.p) if j not in sup]
        if v_pool is not None:
            v_supports = [tuple(v) for v in v_pool if all(j in outside for j in v)]
        else:
            v_supports = [c for size in range(1, min(k, len(outside)) + 1)
                          for c in combinations(outside, size)]
        for vs in v_supports:
            idx = np.asarray(vs)
            lam = float(np.linalg.eigvalsh(W[np.ix_(idx, idx)])[0])
            if lam < best:
                best, arg = lam, (sup, vs)
    return DesignStat(value=best, exhaustive=exhaustive, argmax=arg)


@dataclass
class BetaMinReport:
    passed: bool
    margin: float
    threshold: float
    c: float
    min_active: float
    inactive_norm: float


def beta_min_check(data: Dataset, prior: Prior, c: float = 2.0) -> BetaMinReport:
    """Check min active |beta*_j| >= c sigma sqrt(log p / n) and that beta*
    vanishes off the planted support."""
    if not data.has_truth:
        raise ValueError("beta_min_check requires planted truth")
    threshold = c * prior.sigma * np.sqrt(np.log(data.p) / data.n)
    active = data.z_star.active()
    min_active = float(np.min(np.abs(data.beta_star[active]))) if active.size else 0.0
    inactive_norm = float(np.linalg.norm(data.beta_star[data.z_star.inactive()]))
    margin = min_active / threshold if threshold > 0 else np.inf
    return BetaMinReport(
        passed=bool(min_active >= threshold and inactive_norm == 0.0),
        margin=margin,
        threshold=threshold,
        c=c,
        min_active=min_active,
        inactive_norm=inactive_norm,
    )
