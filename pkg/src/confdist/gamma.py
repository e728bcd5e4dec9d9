"""Gamma regression with log link: likelihood, IRLS fit, and profile deviances.

The model is y_i ~ Gamma with mean mu_i = exp(x_i' beta) and precision
varphi (variance mu_i^2 / varphi).  Up to a data-only constant the
log-likelihood is

    loglik(beta, varphi) = -varphi * sum_i b_i(beta) - n * cumulant(varphi),

where b_i = (y_i - mu_i)/mu_i - log(y_i/mu_i) >= 0 is the per-observation
unit deviance term and cumulant(varphi) = log Gamma(varphi)
- varphi*log(varphi) + varphi collects the precision-dependent normalizer.
Under the log link the iterative weighted least squares update has identity
weights, so beta is fit by repeated plain least squares on the working
response; the precision then solves a strictly monotone scalar score
equation.  Only this family/link pair is supported: the identity-weight
simplification is specific to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConvergenceError, DegenerateFitError, DomainError
from .numerics import digamma, find_root, log_gamma, trigamma

__all__ = [
    "GammaFit",
    "ProfileDeviance",
    "cumulant",
    "cumulant_d1",
    "cumulant_d2",
    "unit_deviance_terms",
    "gamma_loglik",
    "solve_precision",
    "fit_irls",
    "profile_precision_at",
    "profile_deviance_precision",
    "profile_deviance_beta",
]

# Mean unit deviance below this is treated as a perfect fit: the implied
# precision estimate would exceed ~5e12, far outside float-stable territory.
_DEGENERATE_MEAN_B = 1e-13


# ---------------------------------------------------------------------------
# Precision-side cumulant pieces
# ---------------------------------------------------------------------------


def cumulant(varphi: float) -> float:
    """Normalizing part of the log density as a function of the precision."""
    v = float(varphi)
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"precision must be positive, got {varphi!r}")
    return log_gamma(v) - v * math.log(v) + v


def cumulant_d1(varphi: float) -> float:
    """First derivative: digamma(varphi) - log(varphi), negative and increasing."""
    v = float(varphi)
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"precision must be positive, got {varphi!r}")
    return digamma(v) - math.log(v)


def cumulant_d2(varphi: float) -> float:
    """Second derivative: trigamma(varphi) - 1/varphi, strictly positive."""
    v = float(varphi)
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"precision must be positive, got {varphi!r}")
    return trigamma(v) - 1.0 / v


def unit_deviance_terms(y: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """b_i = (y_i - mu_i)/mu_i - log(y_i/mu_i); zero exactly when y_i = mu_i."""
    r = y / mu
    return r - 1.0 - np.log(r)


# ---------------------------------------------------------------------------
# Likelihood and fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaFit:
    beta_hat: np.ndarray
    varphi_hat: float
    mu_hat: np.ndarray
    loglik: float
    sum_b: float
    n: int
    p: int


@dataclass(frozen=True)
class ProfileDeviance:
    """Twice the gap between maximized and profile log-likelihoods."""

    value: float
    at: object  # scalar precision or coefficient vector
    dims: int

    def __post_init__(self):
        if self.value < 0.0:
            raise DomainError(f"profile deviance must be nonnegative, got {self.value!r}")


def gamma_loglik(beta: np.ndarray, varphi: float, data: Dataset) -> float:
    """Exact log-likelihood up to an additive function of the data alone."""
    data.require_positive_response()
    v = float(varphi)
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"precision must be positive, got {varphi!r}")
    mu = np.exp(data.X @ np.asarray(beta, dtype=float))
    b = unit_deviance_terms(data.y, mu)
    return float(-v * b.sum() - data.n * cumulant(v))


def solve_precision(mean_b: float, tol: float = 1e-15) -> float:
    """Precision solving cumulant_d1(varphi) = -mean_b, for mean_b > 0.

    The score function log(varphi) - digamma(varphi) - mean_b is strictly
    decreasing from +inf to 0, so the root is unique.  A damped Newton
    iteration from the classical shape-estimate starting point converges in
    a few steps; if it stalls, a geometric bracket expansion around
    1/(2*mean_b) (the large-precision inverse of the score) finishes the job.
    The root is polished to the evaluation noise floor of the score: profile
    deviance identities amplify a residual by 2*n*varphi, so 1e-13 is not
    small enough downstream.
    """
    m = float(mean_b)
    if not (math.isfinite(m) and m > 0):
        raise DomainError(f"mean unit deviance must be positive, got {mean_b!r}")

    phi = (3.0 - m + math.sqrt((m - 3.0) ** 2 + 24.0 * m)) / (12.0 * m)
    for _ in range(40):
        g = math.log(phi) - digamma(phi) - m
        tol_eff = max(tol, 8e-16 * (1.0 + abs(math.log(phi)) + m))
        if abs(g) <= tol_eff:
            return phi
        gp = 1.0 / phi - trigamma(phi)  # strictly negative
        step = g / gp
        new = phi - step
        while new <= 0.0:  # damp steps that overshoot the domain
            step *= 0.5
            new = phi - step
        if new == phi:
            return phi
        phi = new
    if abs(math.log(phi) - digamma(phi) - m) <= 1e-9:
        return phi
    start = 1.0 / (2.0 * m)
    return find_root(
        lambda v: math.log(v) - digamma(v) - m,
        (start / 8.0, start * 8.0),
        tol=1e-13,
        limits=(1e-300, math.inf),
    )


def _check_rank(data: Dataset) -> None:
    s = np.linalg.svd(data.X, compute_uv=False)
    tol = np.finfo(float).eps * max(data.n, data.p) * s[0]
    rank = int(np.sum(s > tol))
    if rank < data.p:
        data.raise_rank_deficient(rank, tol)


def fit_irls(data: Dataset, init: np.ndarray | None = None, max_iter: int = 200,
             tol: float = 1e-12) -> GammaFit:
    """Maximum likelihood fit by iterative least squares on the working response.

    Coefficients start at the least-squares fit of log(y) on X (exact for
    noise-free data).  Each iteration regresses eta + (y - mu)/mu on X; a
    proposed step that increases the summed unit deviance is halved until it
    does not.  Convergence is a relative change of the summed unit deviance
    below ``tol``; afterwards the precision solves its own score equation.

    Raises :class:`ConvergenceError` (with the deviance trace attached) when
    the iteration budget runs out, and :class:`DegenerateFitError` on a
    perfect fit, which leaves the precision estimate unbounded; the error
    carries the converged coefficients in ``beta_hat``.
    """
    data.require_positive_response()
    _check_rank(data)
    X, y = data.X, data.y
    xtx = X.T @ X

    if init is not None:
        beta = np.asarray(init, dtype=float)
        if beta.shape != (data.p,):
            raise DomainError(f"init must have length {data.p}")
    else:
        beta = np.linalg.lstsq(X, np.log(y), rcond=None)[0]

    def deviance_parts(b_vec):
        with np.errstate(over="ignore", invalid="ignore"):
            eta = X @ b_vec
            mu = np.exp(eta)
            terms = unit_deviance_terms(y, mu)
            s = float(terms.sum())
        return eta, mu, s

    eta, mu, dev_sum = deviance_parts(beta)
    if not math.isfinite(dev_sum):
        raise ConvergenceError("starting values give a non-finite deviance", trace=[dev_sum])

    # The deviance is flat at the optimum, so a deviance-change rule alone
    # leaves coefficient scores around 1e-7; convergence additionally
    # requires the score itself near its floating-point floor.
    score_tol = 1e-12 * data.n * max(1.0, float(np.max(np.abs(X))))
    trace = [dev_sum]
    converged = False
    for _ in range(max_iter):
        working = eta + (y - mu) / mu
        proposal = np.linalg.solve(xtx, X.T @ working)
        step = 1.0
        # acceptance slack sits at the rounding floor of the summed deviance,
        # so the last Newton steps are not rejected for float noise
        slack = 1e-11 * max(1.0, abs(dev_sum))
        while True:
            candidate = beta + step * (proposal - beta)
            eta_new, mu_new, dev_new = deviance_parts(candidate)
            if math.isfinite(dev_new) and dev_new <= dev_sum + slack:
                break
            step *= 0.5
            if step < 1e-10:
                eta_new, mu_new, dev_new = eta, mu, dev_sum
                candidate = beta
                break
        moved = abs(dev_sum - dev_new)
        beta, eta, mu, dev_sum = candidate, eta_new, mu_new, dev_new
        trace.append(dev_sum)
        score_inf = float(np.max(np.abs(X.T @ (y / mu - 1.0))))
        if moved <= tol * max(1.0, abs(dev_sum)) and score_inf <= score_tol:
            converged = True
            break

    score = X.T @ (y / mu - 1.0)
    if not converged and float(np.max(np.abs(score))) > 1e-8:
        raise ConvergenceError(
            f"IRLS did not converge in {max_iter} iterations "
            f"(score sup-norm {float(np.max(np.abs(score))):.3e})",
            trace=trace,
        )

    mean_b = dev_sum / data.n
    if mean_b < _DEGENERATE_MEAN_B:
        err = DegenerateFitError(
            "summed unit deviance is zero (perfect fit); the precision "
            "estimate is unbounded"
        )
        err.beta_hat = beta
        raise err

    varphi = solve_precision(mean_b)
    loglik = -varphi * dev_sum - data.n * cumulant(varphi)
    return GammaFit(
        beta_hat=beta,
        varphi_hat=varphi,
        mu_hat=mu,
        loglik=loglik,
        sum_b=dev_sum,
        n=data.n,
        p=data.p,
    )


# ---------------------------------------------------------------------------
# Profile deviances
# ---------------------------------------------------------------------------


def profile_deviance_precision(fit: GammaFit, varphi: float) -> ProfileDeviance:
    """Closed-form profile deviance for the precision.

    Because the coefficient profile estimate does not move with the
    precision, the profile is available in closed form:

        2n * [(varphi_hat - varphi) * cumulant_d1(varphi_hat)
              + cumulant(varphi) - cumulant(varphi_hat)].

    Values inside the floating-point cancellation floor clamp to 0.
    """
    v = float(varphi)
    if not (math.isfinite(v) and v > 0):
        raise DomainError(f"precision must be positive, got {varphi!r}")
    vh = fit.varphi_hat
    raw = 2.0 * fit.n * ((vh - v) * cumulant_d1(vh) + cumulant(v) - cumulant(vh))
    return ProfileDeviance(value=max(raw, 0.0), at=v, dims=1)


def profile_precision_at(data: Dataset, beta: np.ndarray) -> float:
    """Precision maximizing the likelihood at a fixed coefficient vector."""
    mu = np.exp(data.X @ np.asarray(beta, dtype=float))
    mean_b = float(unit_deviance_terms(data.y, mu).mean())
    if mean_b < _DEGENERATE_MEAN_B:
        raise DegenerateFitError(
            "unit deviance vanishes at this coefficient vector (perfect fit)"
        )
    return solve_precision(mean_b)


def profile_deviance_beta(data: Dataset, fit: GammaFit, beta: np.ndarray) -> ProfileDeviance:
    """Profile deviance for the coefficient vector.

    With G(v) = v * cumulant_d1(v) - cumulant(v), the profile log-likelihood
    at a coefficient vector is n * G(precision profile there), so

        d = 2n * [G(varphi_hat) - G(profile precision at beta)],

    nonnegative because G is increasing and the profile precision never
    exceeds the maximum likelihood precision.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (fit.p,):
        raise DomainError(f"beta must have length {fit.p}, got shape {beta.shape}")
    vt = profile_precision_at(data, beta)
    vh = fit.varphi_hat

    def g_val(v: float) -> float:
        return v * cumulant_d1(v) - cumulant(v)

    raw = 2.0 * fit.n * (g_val(vh) - g_val(vt))
    return ProfileDeviance(value=max(raw, 0.0), at=beta, dims=fit.p)
