"""Privacy mechanism construction: plain, post-processed, restricted, multiplicative.

Four ways to release a nonnegative query value q under epsilon-differential
privacy, all built on Laplace noise of scale b:

* plain            -- q + noise; unbiased but can go negative.
* post-processed   -- a nonnegative function applied to the plain output
                      (ramp, translated ramp, or a user-supplied function);
                      keeps the privacy level of the base mechanism.
* restricted       -- the plain law renormalized to [0, inf); costs a factor
                      of 2 in the privacy level.  Equivalent to rejection
                      sampling until a nonnegative draw appears.
* multiplicative   -- q * exp(noise), for strictly positive queries with a
                      bounded relative change between adjacent datasets.

The restricted law is implemented both by rejection and by inverse transform;
the two are distributionally identical, and the inverse form consumes exactly
one uniform per draw, which the coupling diagnostics in
:mod:`nonneg_dp.verify` exploit.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .distributions import (
    LaplaceDist,
    RngState,
    laplace_cdf,
    laplace_pdf,
    laplace_quantile,
    sample_laplace,
)

__all__ = [
    "PrivacyParams",
    "PostProcessor",
    "Variant",
    "MechanismSpec",
    "make_laplace_mechanism",
    "make_postprocessed_mechanism",
    "make_restricted_mechanism",
    "make_multiplicative_mechanism",
    "apply_postprocessor",
    "sample_mechanism",
    "restricted_cdf",
    "restricted_pdf",
    "sample_restricted_rejection",
    "sample_restricted_inverse",
    "guaranteed_privacy_level",
]


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget epsilon and query sensitivity; implies scale = sensitivity/epsilon.

    For multiplicative mechanisms ``sensitivity`` holds the relative bound K,
    which bounds the sensitivity of the log-transformed query.
    """

    epsilon: float
    sensitivity: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not (math.isfinite(self.sensitivity) and self.sensitivity >= 0):
            raise ValueError(f"sensitivity must be nonnegative and finite, got {self.sensitivity}")

    @property
    def scale(self) -> float:
        return self.sensitivity / self.epsilon


# Square-integrability tolerance for user-supplied post-processors: doubling
# the truncation radius must change the weighted integral of f^2 by less than
# this relative amount.
_VPLUS_RTOL = 1e-8
_VPLUS_GRID_POINTS = 10_000


def _weighted_square_integral(func: Callable[[float], float], scale: float, radius: float) -> float:
    def integrand(x: float) -> float:
        try:
            return func(x) ** 2 * math.exp(-abs(x) / scale)
        except OverflowError:
            return math.inf

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=integrate.IntegrationWarning)
        value, _ = integrate.quad(integrand, -radius, radius, points=[0.0], limit=200)
    return value


def _check_v_plus_membership(func: Callable[[float], float], scale: float) -> None:
    """Reject functions outside the cone of nonnegative, square-integrable
    post-processors under the exp(-|x|/b) weight."""
    radius = 20.0 * scale
    grid = np.linspace(-radius, radius, _VPLUS_GRID_POINTS)
    values = np.array([func(x) for x in grid], dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("post-processor not nonnegative")

    previous = _weighted_square_integral(func, scale, radius)
    for _ in range(8):
        radius *= 2.0
        current = _weighted_square_integral(func, scale, radius)
        if not math.isfinite(current):
            break
        if abs(current - previous) <= max(_VPLUS_RTOL * abs(current), 1e-12):
            return
        previous = current
    raise ValueError("post-processor not square-integrable under the Laplace weight")


@dataclass(frozen=True)
class PostProcessor:
    """A nonnegative deterministic function applied to mechanism outputs.

    Use the classmethod constructors.  ``custom`` functions are vetted at
    construction: nonnegativity is spot-checked on a grid and
    square-integrability under the exp(-|x|/scale) weight is required, which
    guarantees finite first and second output moments at every query value.
    """

    kind: str
    alpha: float = 0.0
    func: Callable[[float], float] | None = None
    scale: float | None = None

    @classmethod
    def ramp(cls) -> "PostProcessor":
        """max(x, 0): clamp negative outputs to the boundary."""
        return cls(kind="ramp", alpha=0.0)

    @classmethod
    def translated_ramp(cls, alpha: float) -> "PostProcessor":
        """max(x - alpha, 0) for a translation alpha >= 0."""
        if not (math.isfinite(alpha) and alpha >= 0):
            raise ValueError(f"translation must be nonnegative, got {alpha}")
        return cls(kind="translated-ramp", alpha=float(alpha))

    @classmethod
    def custom(cls, func: Callable[[float], float], scale: float) -> "PostProcessor":
        if not (math.isfinite(scale) and scale > 0):
            raise ValueError(f"scale must be positive, got {scale}")
        _check_v_plus_membership(func, scale)
        return cls(kind="custom", func=func, scale=float(scale))


def apply_postprocessor(pp: PostProcessor, x):
    """Apply the post-processing function to a scalar or array of outputs."""
    if pp.kind in ("ramp", "translated-ramp"):
        out = np.maximum(np.asarray(x, dtype=float) - pp.alpha, 0.0)
        return float(out) if out.ndim == 0 else out
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        out = np.asarray(float(pp.func(float(arr))))
    else:
        out = np.array([pp.func(float(v)) for v in arr], dtype=float)
    if np.any(out < 0):
        raise ValueError("post-processor not nonnegative")
    return float(out) if out.ndim == 0 else out


class Variant(enum.Enum):
    PLAIN = "plain"
    POST_PROCESSED = "post-processed"
    RESTRICTED = "restricted"
    MULTIPLICATIVE = "multiplicative"


@dataclass(frozen=True)
class MechanismSpec:
    """Immutable description of one mechanism family, parameterized by the
    true query value at sampling time.

    ``scale`` is the Laplace scale actually used.  ``fair_comparison`` marks a
    restricted mechanism built with doubled scale so that its guaranteed
    privacy level equals the stated epsilon rather than twice it.
    """

    variant: Variant
    privacy: PrivacyParams
    scale: float
    postprocessor: PostProcessor | None = None
    k_bound: float | None = None
    fair_comparison: bool = False
    warning: str | None = None


def make_laplace_mechanism(privacy: PrivacyParams) -> MechanismSpec:
    """Plain additive mechanism with the tight scale b = sensitivity/epsilon."""
    warning = None
    if privacy.sensitivity == 0.0:
        warning = "degenerate mechanism: zero sensitivity adds no noise"
        warnings.warn(warning)
    return MechanismSpec(Variant.PLAIN, privacy, privacy.scale, warning=warning)


def make_postprocessed_mechanism(privacy: PrivacyParams, pp: PostProcessor) -> MechanismSpec:
    base = make_laplace_mechanism(privacy)
    return MechanismSpec(Variant.POST_PROCESSED, privacy, base.scale,
                         postprocessor=pp, warning=base.warning)


def make_restricted_mechanism(privacy: PrivacyParams, fair_comparison: bool = False) -> MechanismSpec:
    """Renormalized-to-[0, inf) mechanism.

    By default uses b = sensitivity/epsilon, which guarantees privacy level
    2*epsilon.  With ``fair_comparison`` the scale is doubled so the guarantee
    is exactly epsilon, making bias comparisons against post-processing fair.
    """
    base = make_laplace_mechanism(privacy)
    scale = 2.0 * base.scale if fair_comparison else base.scale
    return MechanismSpec(Variant.RESTRICTED, privacy, scale,
                         fair_comparison=fair_comparison, warning=base.warning)


def make_multiplicative_mechanism(epsilon: float, k_bound: float) -> MechanismSpec:
    """Release q * exp(noise) with b = k_bound/epsilon, for strictly positive queries.

    Construction succeeds even when the bound is too large for finite moments;
    a non-fatal warning is attached so divergence experiments can still run.
    """
    if not (math.isfinite(k_bound) and k_bound > 0):
        raise ValueError(f"relative bound must be positive and finite, got {k_bound}")
    privacy = PrivacyParams(epsilon, k_bound)
    warning = None
    if k_bound >= epsilon:
        warning = "relative bound >= epsilon: mechanism mean is infinite"
    elif k_bound >= epsilon / 2.0:
        warning = "relative bound >= epsilon/2: mechanism variance is infinite"
    if warning is not None:
        warnings.warn(warning)
    return MechanismSpec(Variant.MULTIPLICATIVE, privacy, privacy.scale,
                         k_bound=float(k_bound), warning=warning)


def guaranteed_privacy_level(spec: MechanismSpec) -> float:
    """Privacy level the construction guarantees: epsilon for plain,
    post-processed, and multiplicative; doubled for restriction unless the
    scale was doubled instead."""
    if spec.variant is Variant.RESTRICTED and not spec.fair_comparison:
        return 2.0 * spec.privacy.epsilon
    return spec.privacy.epsilon


def restricted_cdf(base: LaplaceDist, t):
    """cdf of the base law renormalized to [0, inf):
    (F(t) - F(0)) / (1 - F(0)) for t >= 0, zero below."""
    arr = np.asarray(t, dtype=float)
    mass_below_zero = laplace_cdf(base, 0.0)
    out = np.where(
        arr < 0, 0.0,
        (laplace_cdf(base, np.maximum(arr, 0.0)) - mass_below_zero) / (1.0 - mass_below_zero),
    )
    return float(out) if arr.ndim == 0 else out


def restricted_pdf(base: LaplaceDist, x):
    """Density of the renormalized law: f(x)/(1 - F(0)) on [0, inf)."""
    arr = np.asarray(x, dtype=float)
    normalizer = 1.0 - laplace_cdf(base, 0.0)
    out = np.where(arr < 0, 0.0, laplace_pdf(base, arr) / normalizer)
    return float(out) if arr.ndim == 0 else out


def sample_restricted_rejection(base: LaplaceDist, rng: RngState,
                                max_attempts: int = 64,
                                return_attempts: bool = False):
    """Draw from the base law until a nonnegative value appears.

    For location >= 0 each attempt succeeds with probability >= 1/2, so the
    budget is exhausted with probability at most 2**-max_attempts.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    for attempt in range(1, max_attempts + 1):
        value = sample_laplace(base, rng)
        if value >= 0.0:
            return (value, attempt) if return_attempts else value
    raise RuntimeError("rejection budget exceeded")


def sample_restricted_inverse(base: LaplaceDist, rng: RngState, size: int | None = None):
    """Inverse-transform draw from the restricted law; exactly one uniform per draw.

    Maps a uniform u to the base quantile at F(0) + u*(1 - F(0)), i.e. the
    generalized inverse of the restricted cdf.
    """
    mass_below_zero = laplace_cdf(base, 0.0)
    u = rng.uniform(size)
    p = mass_below_zero + u * (1.0 - mass_below_zero)
    # u < 1 keeps p < 1 exactly, but the float sum can round up to 1.0.
    p = np.minimum(p, np.nextafter(1.0, 0.0))
    return laplace_quantile(base, p)


def sample_mechanism(spec: MechanismSpec, q: float, rng: RngState, size: int | None = None):
    """Draw one output (or ``size`` outputs) of the mechanism at true value q."""
    if not (math.isfinite(q) and q >= 0):
        raise ValueError(f"query value must be nonnegative and finite, got {q}")
    if spec.variant is Variant.MULTIPLICATIVE:
        if q == 0.0:
            raise ValueError("query must be strictly positive for the multiplicative mechanism")
        noise = sample_laplace(LaplaceDist(0.0, spec.scale), rng, size)
        return q * np.exp(noise)
    if spec.scale == 0.0:
        value = float(q) if size is None else np.full(size, float(q))
        if spec.variant is Variant.POST_PROCESSED:
            return apply_postprocessor(spec.postprocessor, value)
        return value
    base = LaplaceDist(q, spec.scale)
    if spec.variant is Variant.PLAIN:
        return sample_laplace(base, rng, size)
    if spec.variant is Variant.POST_PROCESSED:
        return apply_postprocessor(spec.postprocessor, sample_laplace(base, rng, size))
    return sample_restricted_inverse(base, rng, size)
