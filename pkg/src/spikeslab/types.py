"""Domain types shared across the samplers.

Conventions used throughout the package:

* the joint density over ``(beta, z)`` is kept fully normalized in log
  space (all Gaussian constants included);
* the model marginal over ``z`` is kept *unnormalized*, up to an additive
  constant that does not depend on ``z`` (normalization happens once, in
  :func:`spikeslab.model.enumerate_posterior`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np


class DimensionError(ValueError):
    """Shapes of X, y, beta, z are inconsistent."""


class EnumerationGuardError(RuntimeError):
    """An exhaustive 2^p operation was requested beyond the configured cap."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalError(RuntimeError):
    """A computation produced NaN/Inf that a rebuild could not repair."""


@dataclass(frozen=True)
class Prior:
    """Gaussian spike-and-slab prior hyperparameters.

    q is the inclusion probability, tau0/tau1 the spike/slab standard
    deviations, sigma the noise standard deviation.  delta is the scaling
    exponent consumed only by :func:`spikeslab.datagen.suggest_prior`.
    """

    q: float
    tau0: float
    tau1: float
    sigma: float
    delta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must be in (0,1), got {self.q}")
        if not 0.0 < self.tau0 < self.tau1:
            raise ValueError(f"need 0 < tau0 < tau1, got tau0={self.tau0}, tau1={self.tau1}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def log_odds(self) -> float:
        """log q/(1-q)."""
        return float(np.log(self.q) - np.log1p(-self.q))


class ModelIndicator:
    """Immutable binary inclusion vector with cached active count.

    Hashable, so it can key :class:`PosteriorTable` entries.
    """

    __slots__ = ("bits", "active_count", "_key")

    def __init__(self, bits):
        arr = np.ascontiguousarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise DimensionError("bits must be a 1-d vector")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("bits must be 0/1")
        arr.setflags(write=False)
        self.bits = arr
        self.active_count = int(arr.sum())
        self._key = arr.tobytes()

    @classmethod
    def zeros(cls, p: int) -> "ModelIndicator":
        return cls(np.zeros(p, dtype=np.uint8))

    @classmethod
    def ones(cls, p: int) -> "ModelIndicator":
        return cls(np.ones(p, dtype=np.uint8))

    @classmethod
    def from_support(cls, p: int, support: Iterable[int]) -> "ModelIndicator":
        bits = np.zeros(p, dtype=np.uint8)
        bits[list(support)] = 1
        return cls(bits)

    @classmethod
    def from_int(cls, p: int, code: int) -> "ModelIndicator":
        """Bit j of ``code`` is coordinate j; used by enumeration loops."""
        bits = (code >> np.arange(p)) & 1
        return cls(bits.astype(np.uint8))

    @property
    def p(self) -> int:
        return self.bits.shape[0]

    def active(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def inactive(self) -> np.ndarray:
        return np.flatnonzero(self.bits == 0)

    def with_flipped(self, j: int) -> "ModelIndicator":
        bits = self.bits.copy()
        bits[j] ^= 1
        return ModelIndicator(bits)

    def union(self, other: "ModelIndicator") -> "ModelIndicator":
        return ModelIndicator(self.bits | other.bits)

    def issubset(self, other: "ModelIndicator") -> bool:
        return bool(np.all(self.bits <= other.bits))

    def hamming(self, other: "ModelIndicator") -> int:
        return int(np.sum(self.bits != other.bits))

    def to01(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def __eq__(self, other):
        return isinstance(other, ModelIndicator) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"ModelIndicator({self.to01()})"


@dataclass
class Dataset:
    """Fixed design X (n x p), response y, optional planted truth.

    X is stored column-major since every sampler step slices columns.
    """

    X: np.ndarray
    y: np.ndarray
    beta_star: Optional[np.ndarray] = None
    z_star: Optional[ModelIndicator] = None
    _xtx: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    _xty: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        X = np.asfortranarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionError(f"incompatible X {X.shape} / y {y.shape}")
        self.X, self.y = X, y
        if (self.beta_star is None) != (self.z_star is None):
            raise ValueError("beta_star and z_star must be given together")
        if self.beta_star is not None:
            bs = np.asarray(self.beta_star, dtype=np.float64)
            if bs.shape != (self.p,) or self.z_star.p != self.p:
                raise DimensionError("truth has wrong dimension")
            if not np.array_equal(np.flatnonzero(bs), self.z_star.active()):
                raise ValueError("supp(beta_star) must equal the active set of z_star")
            self.beta_star = bs

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def has_truth(self) -> bool:
        return self.beta_star is not None

    @property
    def xtx(self) -> np.ndarray:
        if self._xtx is None:
            gram = self.X.T @ self.X
            self._xtx = 0.5 * (gram + gram.T)  # site scans index rows as columns
        return self._xtx

    @property
    def xty(self) -> np.ndarray:
        if self._xty is None:
            self._xty = self.X.T @ self.y
        return self._xty


@dataclass
class JointState:
    """One (beta, z) point; with a continuous spike, inactive beta_j need not be 0."""

    beta: np.ndarray
    z: ModelIndicator

    def __post_init__(self):
        beta = np.ascontiguousarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.shape[0] != self.z.p:
            raise DimensionError("beta and z dimensions differ")
        self.beta = beta

    def copy(self) -> "JointState":
        return JointState(self.beta.copy(), self.z)


class PosteriorTable:
    """Normalized model posterior over all enumerated z, plus its log normalizer."""

    def __init__(self, entries: dict, log_norm: float):
        total = float(sum(entries.values()))
        if not np.isfinite(total) or abs(total - 1.0) > 1e-10:
            raise ValueError(f"table probabilities sum to {total}, expected 1")
        for z, pr in entries.items():
            if not np.isfinite(pr):
                raise ValueError(f"non-finite probability for {z}")
        self.entries = entries
        self.log_norm = float(log_norm)

    def prob(self, z: ModelIndicator) -> float:
        return self.entries.get(z, 0.0)

    @property
    def p(self) -> int:
        return next(iter(self.entries)).p

    def marginal_inclusion(self) -> np.ndarray:
        """Coordinatewise posterior inclusion probabilities."""
        out = np.zeros(self.p)
        for z, pr in self.entries.items():
            out += pr * z.bits
        return out

    def items(self):
        return self.entries.items()

    def __len__(self):
        return len(self.entries)
