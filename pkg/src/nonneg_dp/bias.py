"""Bias formulas for nonnegative Laplace mechanisms and the optimal translation.

The bias of a mechanism at true value q is E[output] - q.  Clamping a Laplace
release at zero (ramp post-processing) inflates the output by
(b/2)exp(-q/b), worst at q = 0 where it equals b/2.  Translating the ramp by
alpha >= 0 trades that boundary inflation against an asymptotic deficit of
alpha, so the worst-case absolute bias over q >= 0 is

    B(alpha) = max{ (b/2) exp(-alpha/b), alpha }

which is minimized at the unique crossing point alpha* of the two terms.
Renormalizing the law to [0, inf) instead ("restriction") biases the release
by (q + b)/(2 exp(q/b) - 1), and at equal guaranteed privacy level the
restriction bias exceeds the clamping bias by a factor strictly greater
than 2 at every q.

Closed forms here are exact; a quadrature engine handles arbitrary
nonnegative square-integrable post-processing functions and doubles as the
independent cross-check for the closed forms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .mechanisms import PostProcessor, apply_postprocessor

__all__ = [
    "BiasEntry",
    "BiasReport",
    "NumericSup",
    "bias_bit",
    "expectation_translated_ramp",
    "bias_translated_ramp",
    "max_abs_bias_translated_ramp",
    "optimal_alpha",
    "bias_restricted",
    "bias_ratio_restricted_vs_bit",
    "expectation_postprocessed_quadrature",
    "max_abs_bias_numeric",
]

# Integration window: the exp(-|x-q|/b) envelope falls below 1e-16 of its
# peak at |x-q| = b*ln(1e16) ~ 36.8b; round up for headroom.
_TAIL_RADII = 40.0


def _require_positive_scale(b: float) -> None:
    if not (math.isfinite(b) and b > 0):
        raise ValueError(f"scale must be positive and finite, got {b}")


def _require_nonnegative(name: float, value: float) -> None:
    if not (math.isfinite(value) and value >= 0):
        raise ValueError(f"{name} must be nonnegative and finite, got {value}")


def bias_bit(q: float, b: float) -> float:
    """Bias of the ramp-clamped (boundary inflated) mechanism: (b/2)exp(-q/b)."""
    _require_positive_scale(b)
    _require_nonnegative("q", q)
    return 0.5 * b * math.exp(-q / b)


def expectation_translated_ramp(q: float, alpha: float, b: float) -> float:
    """E[max(q + noise - alpha, 0)]; two exponential branches meeting at q = alpha."""
    _require_positive_scale(b)
    _require_nonnegative("q", q)
    _require_nonnegative("alpha", alpha)
    if q >= alpha:
        return (q - alpha) + 0.5 * b * math.exp((alpha - q) / b)
    return 0.5 * b * math.exp((q - alpha) / b)


def bias_translated_ramp(q: float, alpha: float, b: float) -> float:
    """Bias of the translated-ramp mechanism; decreasing in q, tends to -alpha."""
    return expectation_translated_ramp(q, alpha, b) - q


def max_abs_bias_translated_ramp(alpha: float, b: float) -> float:
    """Worst-case |bias| over q >= 0: max of the q=0 value and the q->inf limit."""
    _require_positive_scale(b)
    _require_nonnegative("alpha", alpha)
    return max(0.5 * b * math.exp(-alpha / b), alpha)


def optimal_alpha(b: float, tol: float = 1e-12) -> float:
    """Translation minimizing the worst-case bias of the translated ramp.

    Solves (b/2)exp(-alpha/b) - alpha = 0 by bisection on [0, b/2], where the
    left endpoint is positive and the right is negative; the solution is the
    common value of the two competing bias terms.
    """
    _require_positive_scale(b)
    if not tol > 0:
        raise ValueError("tolerance must be positive")

    def gap(alpha: float) -> float:
        return 0.5 * b * math.exp(-alpha / b) - alpha

    lo, hi = 0.0, 0.5 * b
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bias_restricted(q: float, b: float) -> float:
    """Bias of the renormalized-to-[0, inf) mechanism: (q + b)/(2 exp(q/b) - 1).

    Evaluated as (q + b)exp(-q/b)/(2 - exp(-q/b)) so large q/b cannot overflow.
    """
    _require_positive_scale(b)
    _require_nonnegative("q", q)
    decay = math.exp(-q / b)
    return (q + b) * decay / (2.0 - decay)


def bias_ratio_restricted_vs_bit(q: float, epsilon: float, delta_sens: float) -> float:
    """Restriction bias over clamping bias at equal guaranteed privacy level.

    Restriction runs at doubled scale (2*sensitivity/epsilon) to match the
    clamped mechanism's level.  With s = epsilon*q/sensitivity the ratio is
    2 exp(s)(s + 2)/(2 exp(s/2) - 1), which exceeds 2 for every q >= 0.
    """
    _require_nonnegative("q", q)
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _require_positive_scale(delta_sens)
    s = epsilon * q / delta_sens
    # 2 e^s (s+2) / (2 e^{s/2} - 1), overflow-safe form.
    return 2.0 * math.exp(s / 2.0) * (s + 2.0) / (2.0 - math.exp(-s / 2.0))


def expectation_postprocessed_quadrature(pp: PostProcessor, q: float, b: float) -> float:
    """E[pp(q + noise)] by adaptive quadrature against the Laplace density.

    Integrates over [q - 40b, q + 40b], outside which the density is below
    1e-16 of its peak, with subdivision breakpoints at the density kink and at
    the ramp kink so piecewise-smooth integrands keep full convergence order.
    """
    _require_positive_scale(b)
    _require_nonnegative("q", q)
    lo, hi = q - _TAIL_RADII * b, q + _TAIL_RADII * b
    breakpoints = [x for x in (q, pp.alpha if pp.kind != "custom" else None)
                   if x is not None and lo < x < hi]

    def integrand(x: float) -> float:
        return apply_postprocessor(pp, x) * math.exp(-abs(x - q) / b) / (2.0 * b)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value, abserr = integrate.quad(integrand, lo, hi, points=breakpoints,
                                       epsabs=1e-12, epsrel=1e-10, limit=400)
    trouble = any(issubclass(w.category, integrate.IntegrationWarning) for w in caught)
    tolerance = max(1e-10, 1e-8 * abs(value))
    if not math.isfinite(value) or (trouble and abserr > tolerance):
        raise ValueError("post-processor not integrable")
    return value


class NumericSup(NamedTuple):
    """Grid maximum of |bias| plus where it occurred.

    ``argmax_q`` is math.inf when a caller-supplied q->inf limit wins the
    comparison.  ``truncated`` records that the supremum over the unbounded
    domain was only sampled up to q_max (plus the limit, when given).
    """

    value: float
    argmax_q: float
    truncated: bool


def max_abs_bias_numeric(bias_fn: Callable[[float], float], q_max: float,
                         grid_points: int, limit: float | None = None) -> NumericSup:
    """Proxy for sup over q >= 0 of |bias_fn(q)|: a grid on [0, q_max] plus an
    optional analytic q->inf limit supplied by the caller."""
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    if not q_max > 0:
        raise ValueError("q_max must be positive")
    grid = np.linspace(0.0, q_max, grid_points)
    magnitudes = np.array([abs(bias_fn(float(q))) for q in grid])
    best = int(np.argmax(magnitudes))
    value, argmax = float(magnitudes[best]), float(grid[best])
    if limit is not None and abs(limit) > value:
        value, argmax = abs(limit), math.inf
    return NumericSup(value, argmax, truncated=True)


@dataclass(frozen=True)
class BiasEntry:
    q: float
    bias: float
    method: str  # "closed-form" | "quadrature" | "monte-carlo"
    stderr: float | None = None


@dataclass
class BiasReport:
    """Per-q bias values, annotated with the method that produced each number."""

    entries: list[BiasEntry] = field(default_factory=list)

    def add(self, q: float, bias: float, method: str, stderr: float | None = None) -> None:
        if method not in ("closed-form", "quadrature", "monte-carlo"):
            raise ValueError(f"unknown method {method!r}")
        self.entries.append(BiasEntry(q, bias, method, stderr))
        self.entries.sort(key=lambda e: e.q)

    @property
    def max_abs_bias(self) -> float:
        if not self.entries:
            return 0.0
        return max(abs(e.bias) for e in self.entries)

    @property
    def argmax_q(self) -> float:
        if not self.entries:
            return 0.0
        return max(self.entries, key=lambda e: abs(e.bias)).q
