"""Laplace distribution primitives and seeded random streams.

Everything in this package ultimately reduces to the Laplace density

    f_q(x) = (1/2b) * exp(-|x - q|/b)

with location q and scale b > 0, plus its exponential transform (the
log-Laplace law used by multiplicative mechanisms).  This module provides
the exact pdf/cdf/quantile, the moment generating function of exp-transformed
Laplace noise, and deterministic inverse-transform sampling.

Sampling draws exactly one uniform variate per Laplace draw.  That accounting
is load-bearing: the quantile-coupling construction in :mod:`nonneg_dp.verify`
relies on the sample being a deterministic function of a single uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LaplaceDist",
    "RngState",
    "laplace_pdf",
    "laplace_cdf",
    "laplace_quantile",
    "sample_laplace",
    "log_laplace_mgf",
]

# Smallest uniform admitted by the inverse transform; keeps quantile finite
# while preserving the one-draw-per-sample contract.
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class LaplaceDist:
    """Laplace law with mean ``location`` (the true query value) and scale ``scale``."""

    location: float
    scale: float

    def __post_init__(self):
        if not math.isfinite(self.location):
            raise ValueError("location must be finite")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")


@dataclass
class RngState:
    """Deterministic, splittable uniform stream.

    Built on a seeded :class:`numpy.random.SeedSequence`; the same seed always
    reproduces the same stream bit-for-bit.  A state is single-owner: never
    share one across concurrent tasks, derive independent children with
    :meth:`spawn` instead.
    """

    seed: int
    _seq: np.random.SeedSequence = field(init=False, repr=False)
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = int(self.seed)
        self._seq = np.random.SeedSequence(self.seed)
        self._gen = np.random.Generator(np.random.PCG64(self._seq))

    @classmethod
    def _from_seq(cls, seq: np.random.SeedSequence) -> "RngState":
        state = cls.__new__(cls)
        state.seed = int(seq.entropy) if isinstance(seq.entropy, int) else 0
        state._seq = seq
        state._gen = np.random.Generator(np.random.PCG64(seq))
        return state

    def uniform(self, size: int | None = None):
        """One uniform draw in (0, 1), or an array of ``size`` draws."""
        u = self._gen.random(size)
        # Generator.random() yields [0, 1); nudge an exact 0 to the smallest
        # positive double rather than consuming a second draw.
        if size is None:
            return float(u) if u > 0.0 else _TINY
        return np.maximum(u, _TINY)

    def spawn(self, n: int) -> list["RngState"]:
        """Derive ``n`` statistically independent child streams."""
        return [RngState._from_seq(seq) for seq in self._seq.spawn(n)]


def _check_finite(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input")
    return arr


def laplace_pdf(dist: LaplaceDist, x):
    """Density (1/2b) exp(-|x - q|/b); strictly positive for all finite x."""
    arr = _check_finite(x)
    out = np.exp(-np.abs(arr - dist.location) / dist.scale) / (2.0 * dist.scale)
    return out if arr.ndim else float(out)


def laplace_cdf(dist: LaplaceDist, x):
    """Exact cdf: (1/2)e^{(x-q)/b} below the mean, 1 - (1/2)e^{-(x-q)/b} above."""
    arr = _check_finite(x)
    z = (arr - dist.location) / dist.scale
    out = np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)),
                   1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
    return out if arr.ndim else float(out)


def laplace_quantile(dist: LaplaceDist, p):
    """Closed-form inverse cdf, valid for p in the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("probability out of range")
    lower = dist.location + dist.scale * np.log(2.0 * np.minimum(arr, 0.5))
    upper = dist.location - dist.scale * np.log(2.0 * np.minimum(1.0 - arr, 0.5))
    out = np.where(arr < 0.5, lower, upper)
    return out if arr.ndim else float(out)


def sample_laplace(dist: LaplaceDist, rng: RngState, size: int | None = None):
    """Inverse-transform sample; consumes exactly one uniform per draw."""
    return laplace_quantile(dist, rng.uniform(size))


def log_laplace_mgf(b: float, k: float) -> float:
    """E[e^{k L_b}] for zero-mean Laplace noise L_b.

    Equals 1/(1 - k^2 b^2) when |k| b < 1 and +inf otherwise.  The infinity is
    an in-band sentinel: the finite/infinite dichotomy is the result callers
    branch on, not an error condition.
    """
    if not (math.isfinite(b) and b > 0):
        raise ValueError(f"scale must be positive and finite, got {b}")
    if abs(k) * b >= 1.0:
        return math.inf
    return 1.0 / (1.0 - (k * b) ** 2)
