"""Pivots, their reference laws, and confidence densities on the parameter scale.

A pivot is a function of data and parameter whose sampling law is fully known
and parameter free.  Once data are observed, the realized pivot is a fixed
but unknown number; evaluating the reference law's density at it gives a
likelihood-type weight over pivot values, and transporting that weight to a
scalar parameter scale through the change-of-variables rule yields a
confidence density.  Integrals of that density over one-sided sets are
confidence statements for the observed interval; they coincide numerically
with the coverage of the generating procedure, but they are reported here
as *confidence*, never as probability: after the data are in, nothing about
the parameter is random.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numerics
from .errors import (
    ContractViolationError,
    DomainError,
    NoEndpointError,
    UnsupportedOperationError,
)
from .numerics import RealGrid, find_root, integrate

__all__ = [
    "PivotLaw",
    "Pivot",
    "ConfidenceDensity",
    "ConfidenceStatement",
    "extended_likelihood",
    "confidence_of",
    "parameter_density",
    "interval_endpoint",
    "pvalue_pivot",
    "location_pivot",
    "reparameterized",
]

_REAL_LINE = (-math.inf, math.inf)
_POSITIVE_HALF_LINE = (0.0, math.inf)


# ---------------------------------------------------------------------------
# Reference laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PivotLaw:
    """A fully known reference law for a pivot.

    ``corrected_normal`` and ``corrected_chisq`` share the normal and
    chi-square curves; the distinct family tag records that the pivot value
    they are applied to is a higher-order-corrected quantity, which callers
    surface in output flags and labels.
    """

    family: str
    df: tuple[float, ...] = ()

    _FAMILIES = ("normal", "chisq", "student_t", "f", "corrected_normal", "corrected_chisq")

    def __post_init__(self):
        if self.family not in self._FAMILIES:
            raise DomainError(f"unknown pivot law family {self.family!r}")
        expected = {"normal": 0, "corrected_normal": 0, "chisq": 1,
                    "student_t": 1, "corrected_chisq": 1, "f": 2}[self.family]
        if len(self.df) != expected:
            raise DomainError(
                f"{self.family} law takes {expected} degree-of-freedom value(s), got {self.df!r}"
            )
        for d in self.df:
            if not (math.isfinite(d) and d > 0):
                raise DomainError(f"degrees of freedom must be positive, got {d!r}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def normal(cls) -> "PivotLaw":
        return cls("normal")

    @classmethod
    def chisq(cls, df: float) -> "PivotLaw":
        return cls("chisq", (float(df),))

    @classmethod
    def student_t(cls, df: float) -> "PivotLaw":
        return cls("student_t", (float(df),))

    @classmethod
    def f(cls, df1: float, df2: float) -> "PivotLaw":
        return cls("f", (float(df1), float(df2)))

    @classmethod
    def corrected_normal(cls) -> "PivotLaw":
        return cls("corrected_normal")

    @classmethod
    def corrected_chisq(cls, dims: float) -> "PivotLaw":
        return cls("corrected_chisq", (float(dims),))

    # -- curves --------------------------------------------------------------

    @property
    def support(self) -> tuple[float, float]:
        if self.family in ("normal", "corrected_normal", "student_t"):
            return _REAL_LINE
        return _POSITIVE_HALF_LINE

    def in_support(self, v: float) -> bool:
        lo, hi = self.support
        return lo <= v <= hi if lo > -math.inf else v <= hi

    def cdf(self, v: float) -> float:
        v = float(v)
        if math.isinf(v):
            return 0.0 if v < 0 else 1.0
        if self.family in ("normal", "corrected_normal"):
            return numerics.normal_cdf(v)
        if self.family in ("chisq", "corrected_chisq"):
            return numerics.chisq_cdf(v, self.df[0]) if v > 0 else 0.0
        if self.family == "student_t":
            return numerics.t_cdf(v, self.df[0])
        return numerics.f_cdf(v, self.df[0], self.df[1]) if v > 0 else 0.0

    def pdf(self, v: float) -> float:
        v = float(v)
        if not math.isfinite(v):
            return 0.0
        if self.family in ("normal", "corrected_normal"):
            return numerics.normal_pdf(v)
        if self.family in ("chisq", "corrected_chisq"):
            return numerics.chisq_pdf(v, self.df[0])
        if self.family == "student_t":
            return numerics.t_pdf(v, self.df[0])
        return numerics.f_pdf(v, self.df[0], self.df[1])

    def quantile(self, p: float, tol: float = 1e-12) -> float:
        """Inverse CDF by deterministic root finding on the CDF."""
        p = float(p)
        if not 0.0 < p < 1.0:
            raise DomainError(f"quantile level must lie in (0, 1), got {p!r}")
        lo, hi = self.support
        if lo == 0.0:
            scale = self.df[0] if self.family != "f" else 1.0
            bracket = (1e-12, max(4.0 * scale, 10.0))
            limits = (0.0, math.inf)
        else:
            bracket = (-2.0, 2.0)
            limits = None
        return find_root(lambda v: self.cdf(v) - p, bracket, tol=tol, limits=limits)


# ---------------------------------------------------------------------------
# Pivots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pivot:
    """A realized pivot: parameter point -> pivot value, with its law.

    Observed data are bound at construction time, so ``value_fn`` maps a
    parameter point (scalar, or a vector for ball-type pivots) to the
    realized pivot value.  For scalar parameters, ``jacobian_fn`` gives
    |dv/dtheta| and ``monotonic`` declares the direction of v in theta,
    which is verified numerically (never silently assumed) whenever a
    density is built on a grid.
    """

    law: PivotLaw
    value_fn: Callable[..., float]
    jacobian_fn: Callable[..., float] | None = None
    monotonic: str = "decreasing"  # "decreasing" | "increasing" | "none"
    param_support: tuple[float, float] = _REAL_LINE
    hint: tuple[float, float] = (0.0, 1.0)  # (center, scale) for bracketing
    label: str = "pivot"

    def __post_init__(self):
        if self.monotonic not in ("decreasing", "increasing", "none"):
            raise DomainError(f"monotonic must be decreasing/increasing/none, got {self.monotonic!r}")
        if self.jacobian_fn is not None and self.monotonic == "none":
            raise DomainError("a jacobian requires a declared monotone direction")

    def value(self, theta) -> float:
        return float(self.value_fn(theta))

    def jacobian(self, theta) -> float:
        if self.jacobian_fn is None:
            raise UnsupportedOperationError(
                f"{self.label}: no parameter-scale jacobian is defined"
            )
        j = float(self.jacobian_fn(theta))
        if not (math.isfinite(j) and j > 0):
            raise DomainError(f"{self.label}: jacobian must be positive, got {j!r}")
        return j


@dataclass(frozen=True)
class ConfidenceStatement:
    """A one-sided or pivot-ball confidence assertion for observed data.

    ``level`` is a confidence, not a probability: it equals the reference
    law's CDF at the defining bound and matches the coverage of the
    generating procedure.
    """

    kind: str  # "one_sided_lower" | "one_sided_upper" | "pivot_ball"
    level: float
    endpoint: float | None = None  # parameter-scale endpoint for one-sided sets
    pivot_bound: float | None = None  # bound b of the set {v <= b}

    def __post_init__(self):
        if self.kind not in ("one_sided_lower", "one_sided_upper", "pivot_ball"):
            raise DomainError(f"unknown statement kind {self.kind!r}")
        if not 0.0 < self.level < 1.0:
            raise DomainError(f"level must lie in (0, 1), got {self.level!r}")


@dataclass(frozen=True)
class ConfidenceDensity:
    """A pointwise-evaluable, integrable density over one parameter scale."""

    density_fn: Callable[[float], float] = field(repr=False)
    support: tuple[float, float] = _REAL_LINE
    label: str = "confidence density"

    def __call__(self, theta: float) -> float:
        lo, hi = self.support
        if theta < lo or theta > hi:
            return 0.0
        val = float(self.density_fn(theta))
        return max(val, 0.0)

    def mass(self, lo: float, hi: float, tol: float = 1e-9) -> float:
        """Integrated confidence over [lo, hi] intersected with the support."""
        a = max(lo, self.support[0])
        b = min(hi, self.support[1])
        if a >= b:
            return 0.0
        return integrate(self, (a, b), tol=tol)

    def total_mass(self, tol: float = 1e-9) -> float:
        return self.mass(self.support[0], self.support[1], tol=tol)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def extended_likelihood(pivot: Pivot, theta) -> float:
    """Reference-law density at the realized pivot value.

    Returns 0.0 (not an error) when the realized value falls on or outside
    the law's support boundary; ``pivot.law.in_support`` makes the boundary
    condition checkable by callers, since simulation draws legitimately land
    in the tails.
    """
    v = pivot.value(theta)
    if not pivot.law.in_support(v):
        return 0.0
    return pivot.law.pdf(v)


def confidence_of(pivot: Pivot, bound: float, side: str = "<=") -> float:
    """Confidence attached to the pivot set {v <= bound} (or {v >= bound})."""
    if side not in ("<=", ">="):
        raise DomainError(f"side must be '<=' or '>=', got {side!r}")
    c = pivot.law.cdf(bound)
    return c if side == "<=" else 1.0 - c


def _check_monotone(pivot: Pivot, grid: RealGrid) -> np.ndarray:
    values = np.array([pivot.value(float(t)) for t in grid.points])
    diffs = np.diff(values)
    expect_positive = pivot.monotonic == "increasing"
    bad = diffs <= 0 if expect_positive else diffs >= 0
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ContractViolationError(
            f"{pivot.label}: declared {pivot.monotonic} but pivot value moved from "
            f"{values[i]:.6g} to {values[i + 1]:.6g} on "
            f"[{grid.points[i]:.6g}, {grid.points[i + 1]:.6g}]"
        )
    return values


def parameter_density(pivot: Pivot, grid: RealGrid) -> ConfidenceDensity:
    """Confidence density on the parameter scale via the transformation rule.

    density(theta) = law.pdf(v(theta)) * |dv/dtheta|.  Requires a scalar
    monotone pivot with a jacobian; monotonicity is verified on ``grid``
    before the density is returned.
    """
    if pivot.jacobian_fn is None:
        raise UnsupportedOperationError(
            f"{pivot.label}: parameter-scale density needs a jacobian; "
            "only pivot-ball confidence statements are available"
        )
    _check_monotone(pivot, grid)
    lo, hi = pivot.param_support

    def density(theta: float) -> float:
        if not lo < theta < hi:  # open support: boundary carries no mass
            return 0.0
        v = pivot.value(theta)
        if not pivot.law.in_support(v) or not math.isfinite(v):
            return 0.0
        f = pivot.law.pdf(v)
        if f == 0.0:
            return 0.0
        return f * pivot.jacobian(theta)

    return ConfidenceDensity(density, support=pivot.param_support,
                             label=f"{pivot.label} confidence density")


def _support_transform(support: tuple[float, float]):
    """Map the parameter support onto the real line for bracket searches."""
    lo, hi = support
    if lo == -math.inf and hi == math.inf:
        return (lambda u: u), (lambda t: t)
    if lo == 0.0 and hi == math.inf:
        return (lambda u: math.exp(u)), (lambda t: math.log(t))
    raise UnsupportedOperationError(f"unsupported parameter support {support!r}")


def invert_pivot(pivot: Pivot, target: float, tol: float = 1e-10) -> float:
    """Solve v(theta) = target for theta inside the pivot's support.

    Brackets by geometric expansion on a transformed axis (identity for the
    real line, log for the positive half line), doubling the half width up
    to 60 times from the pivot's hint; raises :class:`NoEndpointError` when
    the schedule never straddles the target.
    """
    to_theta, to_u = _support_transform(pivot.param_support)
    center, scale = pivot.hint
    u0 = to_u(center if pivot.param_support[0] != 0.0 else max(center, 1e-300))
    half = max(abs(scale), 1e-8)
    if pivot.param_support[0] == 0.0:
        half = max(half / max(center, 1e-300), 0.25)

    def g(u: float) -> float:
        return pivot.value(to_theta(u)) - target

    try:
        u = find_root(g, (u0 - half, u0 + half), tol=tol)
    except ArithmeticError as exc:
        raise NoEndpointError(
            f"{pivot.label}: could not bracket pivot value {target:.6g} "
            f"starting from {center:.6g} +/- {scale:.6g}"
        ) from exc
    return to_theta(u)


def interval_endpoint(pivot: Pivot, level: float, side: str, tol: float = 1e-10) -> float:
    """Parameter endpoint of a one-sided statement carrying ``level`` confidence.

    ``side="lower"`` returns t with C(theta >= t; y) = level, ``side="upper"``
    returns t with C(theta <= t; y) = level.  The direction is resolved from
    the pivot's declared monotonicity, so lower(level) and upper(1 - level)
    agree.
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level!r}")
    if side not in ("lower", "upper"):
        raise DomainError(f"side must be 'lower' or 'upper', got {side!r}")
    if pivot.monotonic == "none":
        raise UnsupportedOperationError(
            f"{pivot.label}: endpoints need a scalar monotone pivot"
        )
    wants_cdf_at_level = (side == "lower") == (pivot.monotonic == "decreasing")
    q = pivot.law.quantile(level if wants_cdf_at_level else 1.0 - level)
    return invert_pivot(pivot, q, tol=tol)


def one_sided_statement(pivot: Pivot, level: float, side: str) -> ConfidenceStatement:
    """Bundle an endpoint with its confidence level and the defining bound."""
    endpoint = interval_endpoint(pivot, level, side)
    kind = "one_sided_lower" if side == "lower" else "one_sided_upper"
    return ConfidenceStatement(kind, level, endpoint=endpoint,
                               pivot_bound=pivot.value(endpoint))


def pvalue_pivot(sufficient_cdf: Callable[[float, float], float], s_obs: float,
                 theta: float) -> float:
    """Right-sided P-value pivot 1 - F_theta(s_obs) from a parametric CDF.

    As a function of theta with the statistic fixed this is a confidence
    CDF; its theta-derivative is the classical confidence density, which
    ``parameter_density`` reproduces for the corresponding pivot.
    """
    w = 1.0 - float(sufficient_cdf(s_obs, theta))
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"sufficient_cdf returned a value outside [0, 1] at {theta!r}")
    return w


# ---------------------------------------------------------------------------
# Ready-made pivots and reparameterization
# ---------------------------------------------------------------------------


def location_pivot(estimate: float, scale: float = 1.0) -> Pivot:
    """Normal location pivot v = (estimate - theta)/scale with unit-law N(0,1)."""
    if not (math.isfinite(scale) and scale > 0):
        raise DomainError(f"scale must be positive, got {scale!r}")
    return Pivot(
        law=PivotLaw.normal(),
        value_fn=lambda theta: (estimate - theta) / scale,
        jacobian_fn=lambda theta: 1.0 / scale,
        monotonic="decreasing",
        param_support=_REAL_LINE,
        hint=(estimate, scale),
        label="normal location",
    )


def reparameterized(pivot: Pivot, forward, inverse, inverse_deriv,
                    support: tuple[float, float]) -> Pivot:
    """The same pivot expressed on the scale eta = forward(theta).

    ``inverse`` maps eta back to theta, ``inverse_deriv`` is d theta/d eta,
    and ``support`` is the image of the parameter support under ``forward``.
    The jacobian picks up |inverse_deriv| per the chain rule, so confidence
    masses are equivariant under strictly monotone smooth maps.
    """
    center, scale = pivot.hint
    increasing_map = inverse_deriv(forward(center)) > 0
    direction = pivot.monotonic
    if not increasing_map and direction in ("decreasing", "increasing"):
        direction = "increasing" if direction == "decreasing" else "decreasing"
    new_center = forward(center)
    new_scale = abs(forward(center + 0.5 * scale) - new_center) + 1e-12
    jac = None
    if pivot.jacobian_fn is not None:
        jac = lambda eta: pivot.jacobian(inverse(eta)) * abs(inverse_deriv(eta))
    lo, hi = pivot.param_support

    def value(eta: float) -> float:
        try:
            theta = inverse(eta)
        except OverflowError:
            theta = math.inf if ((eta > new_center) == increasing_map) else -math.inf
        if not lo < theta < hi:
            # the inverse map under/overflowed past the open support; the
            # pivot value diverges there, which any law density maps to 0
            toward_lo = theta <= lo
            diverging_up = (pivot.monotonic == "decreasing") == toward_lo
            return math.inf if diverging_up else -math.inf
        return pivot.value(theta)

    return Pivot(
        law=pivot.law,
        value_fn=value,
        jacobian_fn=jac,
        monotonic=direction,
        param_support=support,
        hint=(new_center, new_scale),
        label=f"{pivot.label} (reparameterized)",
    )
