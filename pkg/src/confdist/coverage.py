"""Monte Carlo verification that observed-interval confidence equals coverage.

A scenario fixes a model, a true parameter, a design, sample size, nominal
levels, and methods.  Each replication draws data from the truth on its own
random stream (stream id = replication index, so results are independent of
execution order and worker count), fits the model, and evaluates each
method's one-sided confidence transform at the truth; the truth is covered
by the level-alpha statement exactly when that transform is <= alpha.
Reports reduce hit counts, so a run is reproducible bit for bit across any
number of workers.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConvergenceError, DegenerateFitError, DomainError, ScenarioError
from .gamma import fit_irls, profile_deviance_beta, profile_deviance_precision
from .higher_order import (
    ball_confidence,
    fraser_root_known_mu,
    signed_root_confidence,
    skovgaard_beta,
    skovgaard_precision,
)
from .linear import coefficient_ball_pivot, contrast, contrast_pivot, fit_ols, variance_pivot
from .numerics import RngStream, chisq_cdf, normal_cdf, rng_draws

__all__ = ["Scenario", "CoverageRow", "CoverageReport", "MethodComparison",
           "run_scenario", "compare_methods", "design_matrix"]

SCHEMA_VERSION = 1

# Stream id reserved for generating recipe-based designs; replication ids
# stay well below it.
_DESIGN_STREAM = 2**63

_MODEL_METHODS = {
    "normal_regression": ("variance_chisq", "contrast_t", "coefficient_f"),
    "gamma_known_mu": ("first_order_z", "fraser_z"),
    "gamma_regression": (
        "first_order_precision",
        "skovgaard_precision",
        "first_order_beta",
        "skovgaard_beta",
    ),
}


@dataclass(frozen=True)
class Scenario:
    """One simulation configuration; validation happens at construction."""

    model: str
    n: int
    replications: int
    seed: int
    levels: tuple[float, ...]
    methods: tuple[str, ...]
    beta: tuple[float, ...] | None = None
    phi: float | None = None  # error variance (normal model)
    varphi: float | None = None  # precision (gamma models)
    design: str = "gaussian"  # "intercept" | "gaussian" (recipe names)
    p: int | None = None  # columns for recipe designs
    contrast_vector: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.model not in _MODEL_METHODS:
            raise ScenarioError(f"unknown model {self.model!r}")
        if self.replications < 100:
            raise ScenarioError("replications must be at least 100")
        if not self.levels:
            raise ScenarioError("at least one nominal level is required")
        for a in self.levels:
            if not 0.0 < a < 1.0:
                raise ScenarioError(f"levels must lie in (0, 1), got {a!r}")
        if not self.methods:
            raise ScenarioError("at least one method is required")
        allowed = _MODEL_METHODS[self.model]
        for m in self.methods:
            if m not in allowed:
                raise ScenarioError(
                    f"method {m!r} is not valid for {self.model}; choose from {allowed}"
                )
        if self.model == "normal_regression":
            if self.beta is None or self.phi is None or self.phi <= 0:
                raise ScenarioError("normal_regression needs beta and positive phi")
        elif self.model == "gamma_known_mu":
            if self.varphi is None or self.varphi <= 0:
                raise ScenarioError("gamma_known_mu needs a positive varphi")
        else:
            if self.beta is None or self.varphi is None or self.varphi <= 0:
                raise ScenarioError("gamma_regression needs beta and positive varphi")
        if self.model != "gamma_known_mu":
            width = len(self.beta)
            if self.design not in ("intercept", "gaussian"):
                raise ScenarioError(f"unknown design recipe {self.design!r}")
            p = self.p if self.p is not None else width
            if p != width:
                raise ScenarioError(f"beta has {width} entries but design width is {p}")
            if self.design == "intercept" and p != 1:
                raise ScenarioError("intercept design has a single column")
            if self.n <= p:
                raise ScenarioError(f"need n > p, got n={self.n}, p={p}")

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n": self.n,
            "replications": self.replications,
            "seed": self.seed,
            "levels": list(self.levels),
            "methods": list(self.methods),
            "beta": list(self.beta) if self.beta is not None else None,
            "phi": self.phi,
            "varphi": self.varphi,
            "design": self.design,
            "p": self.p if self.p is not None else (len(self.beta) if self.beta else None),
            "contrast_vector": list(self.contrast_vector) if self.contrast_vector else None,
        }


@dataclass(frozen=True)
class CoverageRow:
    method: str
    level: float
    hit_count: int
    replications_used: int
    empirical_coverage: float
    mc_stderr: float
    flagged_count: int


@dataclass(frozen=True)
class CoverageReport:
    scenario: dict
    rows: tuple[CoverageRow, ...]
    failures: int
    runtime_seconds: float
    schema_version: int = SCHEMA_VERSION

    def row(self, method: str, level: float) -> CoverageRow:
        for r in self.rows:
            if r.method == method and r.level == level:
                return r
        raise KeyError(f"no row for method={method!r} level={level!r}")

    def coverage(self, method: str, level: float) -> float:
        return self.row(method, level).empirical_coverage

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "failures": self.failures,
            "runtime_seconds": self.runtime_seconds,
            "results": [vars(r) for r in self.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        # no runtime or other volatile metadata: identical runs give
        # identical bytes regardless of worker count
        lines = ["method,level,hit_count,replications_used,empirical_coverage,mc_stderr,flagged_count"]
        for r in self.rows:
            lines.append(
                f"{r.method},{r.level:.17g},{r.hit_count},{r.replications_used},"
                f"{r.empirical_coverage:.17g},{r.mc_stderr:.17g},{r.flagged_count}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Design and data generation
# ---------------------------------------------------------------------------


def design_matrix(sc: Scenario) -> np.ndarray | None:
    """Fixed design for the scenario: built once, shared by all replications."""
    if sc.model == "gamma_known_mu":
        return None
    p = len(sc.beta)
    if sc.design == "intercept":
        return np.ones((sc.n, 1))
    cols = [np.ones(sc.n)]
    if p > 1:
        draws = rng_draws(RngStream(sc.seed, _DESIGN_STREAM), "normal", sc.n * (p - 1))
        cols.extend(draws.reshape(p - 1, sc.n))
    return np.column_stack(cols)


def _simulate(sc: Scenario, X: np.ndarray | None, rep: int) -> np.ndarray:
    stream = RngStream(sc.seed, rep)
    if sc.model == "normal_regression":
        noise = rng_draws(stream, "normal", sc.n)
        return X @ np.array(sc.beta) + math.sqrt(sc.phi) * noise
    if sc.model == "gamma_known_mu":
        return rng_draws(stream, "gamma", sc.n, shape=sc.varphi, scale=1.0 / sc.varphi)
    mu = np.exp(X @ np.array(sc.beta))
    raw = rng_draws(stream, "gamma", sc.n, shape=sc.varphi, scale=1.0 / sc.varphi)
    return mu * raw


# ---------------------------------------------------------------------------
# Per-replication confidence transforms (value u: covered at level a iff u <= a)
# ---------------------------------------------------------------------------


def _transforms_normal(sc: Scenario, X: np.ndarray, y: np.ndarray) -> dict:
    fit = fit_ols(Dataset(y=y, X=X))
    out = {}
    if "variance_chisq" in sc.methods:
        pv = variance_pivot(fit)
        out["variance_chisq"] = (pv.law.cdf(pv.value(sc.phi)), False)
    if "contrast_t" in sc.methods:
        b = np.array(sc.contrast_vector) if sc.contrast_vector else np.eye(len(sc.beta))[0]
        con = contrast(fit, b)
        pv = contrast_pivot(fit, con)
        lam_true = float(b @ np.array(sc.beta))
        out["contrast_t"] = (pv.law.cdf(pv.value(lam_true)), False)
    if "coefficient_f" in sc.methods:
        pv = coefficient_ball_pivot(fit)
        out["coefficient_f"] = (pv.law.cdf(pv.value(np.array(sc.beta))), False)
    return out


def _transforms_known_mu(sc: Scenario, y: np.ndarray) -> dict:
    root = fraser_root_known_mu(y, sc.varphi)
    out = {}
    if "first_order_z" in sc.methods:
        out["first_order_z"] = (normal_cdf(root.signed_root), False)
    if "fraser_z" in sc.methods:
        out["fraser_z"] = (normal_cdf(root.value), root.interpolated)
    return out


def _transforms_gamma(sc: Scenario, X: np.ndarray, y: np.ndarray) -> dict:
    data = Dataset(y=y, X=X)
    fit = fit_irls(data)
    beta_true = np.array(sc.beta)
    out = {}
    if "first_order_precision" in sc.methods:
        dp = profile_deviance_precision(fit, sc.varphi).value
        sign = math.copysign(1.0, fit.varphi_hat - sc.varphi)
        out["first_order_precision"] = (normal_cdf(sign * math.sqrt(dp)), False)
    if "skovgaard_precision" in sc.methods:
        cd = skovgaard_precision(data, fit, sc.varphi)
        out["skovgaard_precision"] = (signed_root_confidence(cd), cd.flagged)
    if "first_order_beta" in sc.methods:
        dp = profile_deviance_beta(data, fit, beta_true)
        out["first_order_beta"] = (chisq_cdf(dp.value, dp.dims), False)
    if "skovgaard_beta" in sc.methods:
        cd = skovgaard_beta(data, fit, beta_true)
        out["skovgaard_beta"] = (ball_confidence(cd), cd.flagged)
    return out


def _run_chunk(sc: Scenario, X: np.ndarray | None, reps: range) -> tuple:
    hits = np.zeros((len(sc.methods), len(sc.levels)), dtype=np.int64)
    flagged = np.zeros(len(sc.methods), dtype=np.int64)
    used = np.zeros(len(sc.methods), dtype=np.int64)
    failures = 0
    levels = np.array(sc.levels)
    for rep in reps:
        y = _simulate(sc, X, rep)
        try:
            if sc.model == "normal_regression":
                transforms = _transforms_normal(sc, X, y)
            elif sc.model == "gamma_known_mu":
                transforms = _transforms_known_mu(sc, y)
            else:
                transforms = _transforms_gamma(sc, X, y)
        except (ConvergenceError, DegenerateFitError):
            failures += 1
            continue
        for i, method in enumerate(sc.methods):
            u, flag = transforms[method]
            hits[i] += u <= levels
            flagged[i] += bool(flag)
            used[i] += 1
    return hits, flagged, used, failures


def run_scenario(sc: Scenario, jobs: int = 1) -> CoverageReport:
    """Execute every replication and reduce the hit counts into a report.

    ``jobs`` > 1 splits the replication range across worker processes; the
    report is identical for any job count because stream ids are replication
    indices and the reduction is an order-insensitive sum.  Replications
    whose fit fails are excluded and counted; more than 1% failures aborts
    the scenario.
    """
    start = time.monotonic()
    if jobs < 1:
        raise DomainError(f"jobs must be positive, got {jobs!r}")
    X = design_matrix(sc)

    if jobs == 1:
        parts = [_run_chunk(sc, X, range(sc.replications))]
    else:
        chunk_edges = np.linspace(0, sc.replications, jobs + 1).astype(int)
        ranges = [range(a, b) for a, b in zip(chunk_edges, chunk_edges[1:]) if a < b]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk, [sc] * len(ranges), [X] * len(ranges), ranges))

    hits = sum(p[0] for p in parts)
    flagged = sum(p[1] for p in parts)
    used = sum(p[2] for p in parts)
    failures = sum(p[3] for p in parts)

    if failures > 0.01 * sc.replications:
        raise ScenarioError(
            f"{failures} of {sc.replications} replications failed to fit (> 1%)"
        )

    rows = []
    for i, method in enumerate(sc.methods):
        for j, level in enumerate(sc.levels):
            n_used = int(used[i])
            rows.append(
                CoverageRow(
                    method=method,
                    level=level,
                    hit_count=int(hits[i, j]),
                    replications_used=n_used,
                    empirical_coverage=int(hits[i, j]) / n_used,
                    mc_stderr=math.sqrt(level * (1.0 - level) / n_used),
                    flagged_count=int(flagged[i]),
                )
            )
    return CoverageReport(
        scenario=sc.to_dict(),
        rows=tuple(rows),
        failures=failures,
        runtime_seconds=time.monotonic() - start,
    )


# ---------------------------------------------------------------------------
# Method comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodComparison:
    baseline: str
    challenger: str
    rows: tuple[dict, ...] = field(repr=False)
    verdict: str = "indistinguishable"

    def table(self) -> str:
        header = (
            f"{'level':>8} {'baseline':>10} {'challenger':>11} "
            f"{'base_err':>9} {'chall_err':>10} {'call':>14}"
        )
        lines = [header]
        for r in self.rows:
            lines.append(
                f"{r['level']:>8.4g} {r['baseline_coverage']:>10.5f} "
                f"{r['challenger_coverage']:>11.5f} {r['baseline_error']:>9.5f} "
                f"{r['challenger_error']:>10.5f} {r['call']:>14}"
            )
        return "\n".join(lines)


def mean_absolute_error(report: CoverageReport, method: str) -> float:
    """Mean |empirical coverage - nominal| over the report's levels."""
    errs = [
        abs(r.empirical_coverage - r.level) for r in report.rows if r.method == method
    ]
    if not errs:
        raise KeyError(f"method {method!r} not present in report")
    return float(np.mean(errs))


def compare_methods(report: CoverageReport, baseline: str, challenger: str) -> MethodComparison:
    """Per-level coverage-error comparison with a two-proportion error guard.

    A level is called for one side only when the error difference exceeds
    twice the combined binomial standard error; the verdict aggregates the
    calls: better somewhere and worse nowhere is ``dominates``, the reverse
    ``dominated``, both sides ``mixed``, neither ``indistinguishable``.
    """
    methods = {r.method for r in report.rows}
    for m in (baseline, challenger):
        if m not in methods:
            raise KeyError(f"method {m!r} not present in report")
    rows = []
    better = worse = 0
    for level in sorted({r.level for r in report.rows}):
        rb = report.row(baseline, level)
        rc = report.row(challenger, level)
        err_b = abs(rb.empirical_coverage - level)
        err_c = abs(rc.empirical_coverage - level)
        se = math.sqrt(
            rb.empirical_coverage * (1 - rb.empirical_coverage) / rb.replications_used
            + rc.empirical_coverage * (1 - rc.empirical_coverage) / rc.replications_used
        )
        if abs(err_c - err_b) <= 2.0 * se:
            call = "tie"
        elif err_c < err_b:
            call = "challenger"
            better += 1
        else:
            call = "baseline"
            worse += 1
        rows.append(
            {
                "level": level,
                "baseline_coverage": rb.empirical_coverage,
                "challenger_coverage": rc.empirical_coverage,
                "baseline_error": err_b,
                "challenger_error": err_c,
                "guard_2se": 2.0 * se,
                "call": call,
            }
        )
    if better and worse:
        verdict = "mixed"
    elif better:
        verdict = "dominates"
    elif worse:
        verdict = "dominated"
    else:
        verdict = "indistinguishable"
    return MethodComparison(baseline=baseline, challenger=challenger,
                            rows=tuple(rows), verdict=verdict)
