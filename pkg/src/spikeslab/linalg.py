"""Fast conditional Gaussian draws and the low-rank cache behind them.

The active-block conditional N(Sigma^{-1} Xbar^T y, sigma^2 Sigma^{-1}) with
Sigma = Xbar^T Xbar + D_t is sampled without ever factorizing Sigma:

    r ~ N(0, D_t^{-1}),  zeta ~ N(0, I_n)
    v = Xbar r + zeta
    u = M_t^{-1} (y/sigma - v),     M_t = I_n + Xbar D_t^{-1} Xbar^T
    return sigma (r + D_t^{-1} Xbar^T u)

All call sites use D_t = (sigma^2/tau1^2) I, but D_t is kept as a diagonal
abstraction.  M_t^{-1} is maintained across model changes by block
Sherman-Morrison-Woodbury updates against the inverse from the last full
rebuild, so re-flipping a column restores the cached inverse exactly.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .types import ConvergenceError, Dataset, ModelIndicator, NumericalError, Prior


class LowRankCache:
    """Inverse of M_t = I_n + Xbar D_t^{-1} Xbar^T, tracked across z changes.

    ``anchor`` is the model at the last full O(n^3) rebuild; moving to a new
    model whose symmetric difference from the anchor has size <= ``r_max``
    is handled by one block Woodbury correction of the anchor inverse
    (rank-1 Sherman-Morrison per flipped column, applied jointly).  Larger
    jumps, and every ``rebuild_every``-th update, force a rebuild to bound
    floating-point drift.
    """

    def __init__(
        self,
        data: Dataset,
        prior: Prior,
        z: ModelIndicator,
        r_max: int = 4,
        rebuild_every: int = 64,
    ):
        self.data = data
        self.d = prior.sigma**2 / prior.tau1**2  # diagonal of D_t
        self.r_max = int(r_max)
        self.rebuild_every = int(rebuild_every)
        self.rebuild_count = 0
        self.generation = 0
        self._rebuild(z)

    def _form_m(self, z: ModelIndicator) -> np.ndarray:
        Xa = self.data.X[:, z.active()]
        return np.eye(self.data.n) + (Xa @ Xa.T) / self.d

    def _rebuild(self, z: ModelIndicator):
        self.anchor = z
        self.z = z
        self.anchor_inv = np.linalg.inv(self._form_m(z))
        self.m_inv = self.anchor_inv
        self.generation = 0
        self.rebuild_count += 1

    def update(self, z_new: ModelIndicator) -> "LowRankCache":
        """Advance the cache to ``z_new``; returns self for chaining."""
        if z_new == self.z:
            return self
        delta = np.flatnonzero(self.anchor.bits != z_new.bits)
        self.generation += 1
        if delta.size > self.r_max or self.generation >= self.rebuild_every:
            self._rebuild(z_new)
            return self
        if delta.size == 0:  # back at the anchor exactly
            self.m_inv = self.anchor_inv
            self.z = z_new
            return self
        # M(z_new) = M(anchor) + U C U^T, C = diag(+-1/d) over flipped columns
        U = self.data.X[:, delta]
        signs = np.where(z_new.bits[delta] == 1, 1.0, -1.0)
        AiU = self.anchor_inv @ U
        inner = np.diag(self.d / signs) + U.T @ AiU
        self.m_inv = self.anchor_inv - AiU @ np.linalg.solve(inner, AiU.T)
        self.z = z_new
        return self

    def apply_inv(self, v: np.ndarray) -> np.ndarray:
        return self.m_inv @ v

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matvec with the exact current M_t (recomputed from X, z, D_t)."""
        Xa = self.data.X[:, self.z.active()]
        return v + Xa @ (Xa.T @ v) / self.d

    def coherence_gap(self, rng: np.random.Generator, trials: int = 3) -> float:
        """max-norm of M (M^{-1} v) - v over random probes; cache invariant."""
        worst = 0.0
        for _ in range(trials):
            v = rng.standard_normal(self.data.n)
            worst = max(worst, float(np.max(np.abs(self.apply(self.apply_inv(v)) - v))))
        return worst


def sample_active_gaussian(
    z: ModelIndicator,
    data: Dataset,
    prior: Prior,
    cache: LowRankCache,
    rng: np.random.Generator,
    solver: str = "direct",
    cg_tol: float = 1e-12,
) -> np.ndarray:
    """One exact draw from N(Sigma^{-1} Xbar^T y, sigma^2 Sigma^{-1}).

    The cache is advanced to ``z`` if needed.  ``solver="cg"`` solves the
    inner system by conjugate gradient preconditioned with the cached
    inverse instead of applying it directly.  A NaN in the output triggers
    one full rebuild and retry before raising.
    """
    cache.update(z)
    for attempt in range(2):
        out = _draw(z, data, prior, cache, rng, solver, cg_tol)
        if np.all(np.isfinite(out)):
            return out
        cache._rebuild(z)
    raise NumericalError("active Gaussian draw produced non-finite values after rebuild")


def _draw(z, data, prior, cache, rng, solver, cg_tol):
    active = z.active()
    k = active.size
    if k == 0:
        return np.empty(0)
    d = cache.d
    Xa = data.X[:, active]
    r = rng.standard_normal(k) / np.sqrt(d)
    zeta = rng.standard_normal(data.n)
    v = Xa @ r + zeta
    rhs = data.y / prior.sigma - v
    if solver == "cg":
        u = cg_solve(cache.apply, rhs, precond=cache.apply_inv, tol=cg_tol, max_iter=data.n + 10)
    else:
        u = cache.apply_inv(rhs)
    return prior.sigma * (r + (Xa.T @ u) / d)


def cg_solve(
    apply_m: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    precond: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    tol: float = 1e-10,
    max_iter: int = 1000,
) -> np.ndarray:
    """Preconditioned conjugate gradient for SPD operators.

    Returns x with ||Mx - b|| / ||b|| <= tol, or raises
    :class:`ConvergenceError` carrying the final relative residual.
    """
    b = np.asarray(b, dtype=np.float64)
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        return np.zeros_like(b)
    x = np.zeros_like(b)
    r = b.copy()
    zv = precond(r) if precond is not None else r
    p = zv.copy()
    rz = float(r @ zv)
    for _ in range(max_iter):
        if np.linalg.norm(r) / nb <= tol:
            return x
        Mp = apply_m(p)
        alpha = rz / float(p @ Mp)
        x = x + alpha * p
        r = r - alpha * Mp
        zv = precond(r) if precond is not None else r
        rz_new = float(r @ zv)
        p = zv + (rz_new / rz) * p
        rz = rz_new
    rel = float(np.linalg.norm(r) / nb)
    if rel <= tol:
        return x
    raise ConvergenceError(f"CG did not reach tol={tol} in {max_iter} iterations", residual=rel)
