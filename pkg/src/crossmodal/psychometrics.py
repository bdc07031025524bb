"""Two-parameter logistic psychometric fitting with confidence zones.

Three-grade tallies collapse to binomial points (one judgment against the
other two), a logistic curve p(x) = 1 / (1 + exp(-(b0 + b1 x))) is fitted
by maximum likelihood with damped Newton steps, and a Wald band on the
linear predictor gives per-level probability bounds at a stated risk ratio.
Observed proportions falling outside the band mark levels where the model
should not be trusted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .session import GradeCounts

GRADIENT_TOL = 1e-8
MAX_ITERATIONS = 100
DEFAULT_RISK_RATIO = 0.05
EXPLORATORY_RIDGE = 1e-6
_ETA_DIVERGENCE = 30.0  # linear predictor beyond this at a data level = runaway fit


class SeparationError(ValueError):
    """Complete separation: the likelihood is unbounded, no finite optimum."""


class DegenerateDataError(ValueError):
    """Too little variation to identify two parameters."""


class NotConvergedError(ValueError):
    pass


class CollapseRule(str, Enum):
    """Which grade counts as success; the other two pool as failure."""

    LOWER_VS_NOT_LOWER = "lower_vs_not_lower"
    HIGHER_VS_NOT_HIGHER = "higher_vs_not_higher"


@dataclass(frozen=True)
class BinomialPoint:
    level: float
    successes: int
    trials: int

    def __post_init__(self) -> None:
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")

    @property
    def proportion(self) -> float:
        return self.successes / self.trials


@dataclass(frozen=True, eq=False)
class LogisticFit:
    beta0: float
    beta1: float
    covariance: np.ndarray  # 2x2, inverse observed information at the optimum
    n_points: int
    log_likelihood: float
    converged: bool
    iterations: int
    collapse: CollapseRule | None = None

    @property
    def pse(self) -> float:
        """Level with fitted probability one half."""
        return -self.beta0 / self.beta1


@dataclass(frozen=True)
class BandPoint:
    level: float
    p_fit: float
    p_low: float
    p_high: float


@dataclass(frozen=True)
class ConfidenceBand:
    risk_ratio: float
    points: tuple[BandPoint, ...]

    def at(self, level: float) -> BandPoint:
        for p in self.points:
            if p.level == level or abs(p.level - level) <= 1e-9 * max(1.0, abs(level)):
                return p
        raise KeyError(f"level {level} not in band")


def collapse(
    tallies: Mapping[float, GradeCounts], rule: CollapseRule
) -> list[BinomialPoint]:
    """Collapse three-grade counts to binomial points, one per level.

    Levels with no responses are dropped. Under LOWER_VS_NOT_LOWER the
    "lower" count is the success count; mirrored for the other rule.
    """
    points = []
    for level in sorted(tallies):
        counts = tallies[level]
        if counts.total == 0:
            continue
        successes = counts.lower if rule is CollapseRule.LOWER_VS_NOT_LOWER else counts.higher
        points.append(BinomialPoint(level=float(level), successes=successes, trials=counts.total))
    return points


def _design(points: Sequence[BinomialPoint]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.array([p.level for p in points], dtype=float)
    s = np.array([p.successes for p in points], dtype=float)
    n = np.array([p.trials for p in points], dtype=float)
    return x, s, n


def log_likelihood(beta0: float, beta1: float, points: Sequence[BinomialPoint]) -> float:
    """Pooled binomial log likelihood, up to the constant binomial coefficients."""
    x, s, n = _design(points)
    eta = beta0 + beta1 * x
    return float(np.sum(s * eta - n * np.logaddexp(0.0, eta)))


def score(beta0: float, beta1: float, points: Sequence[BinomialPoint]) -> np.ndarray:
    """Gradient of the log likelihood with respect to (beta0, beta1)."""
    x, s, n = _design(points)
    resid = s - n * expit(beta0 + beta1 * x)
    return np.array([resid.sum(), (resid * x).sum()])


def observed_information(
    beta0: float, beta1: float, points: Sequence[BinomialPoint]
) -> np.ndarray:
    """Negative Hessian of the log likelihood; 2x2 and positive semidefinite."""
    x, s, n = _design(points)
    p = expit(beta0 + beta1 * x)
    w = n * p * (1.0 - p)
    return np.array([[w.sum(), (w * x).sum()], [(w * x).sum(), (w * x * x).sum()]])


def _check_separation(points: Sequence[BinomialPoint]) -> None:
    ordered = sorted(points, key=lambda p: p.level)
    if any(0 < p.successes < p.trials for p in ordered):
        return
    flags = [1 if p.successes == p.trials else 0 for p in ordered]
    if len(set(flags)) == 1:
        raise DegenerateDataError(
            "all levels are all-successes or all-failures; intercept-only data"
        )
    if flags == sorted(flags) or flags == sorted(flags, reverse=True):
        raise SeparationError(
            "complete separation: a level threshold splits successes from "
            "failures exactly, so the slope diverges"
        )


def fit_logistic(
    points: Sequence[BinomialPoint],
    collapse_rule: CollapseRule | None = None,
    ridge: float = 0.0,
    max_iterations: int = MAX_ITERATIONS,
    gradient_tol: float = GRADIENT_TOL,
) -> LogisticFit:
    """Maximum-likelihood logistic fit via damped Newton iterations.

    Starts from the intercept-only optimum and halves each Newton step until
    the likelihood increases, so the likelihood never falls below the flat
    model's. Convergence means gradient norm below ``gradient_tol``; the
    covariance is the inverse observed information at the optimum.

    A small ``ridge`` penalty (subtracting ridge/2 * |beta|^2) is available
    for exploratory fits on separated data; it is off by default and skips
    the separation check.

    Raises SeparationError on completely separated data and
    DegenerateDataError when fewer than two distinct levels carry
    information.
    """
    if len({p.level for p in points}) < 2:
        raise DegenerateDataError("need at least two distinct levels")
    x, s, n = _design(points)
    pooled = s.sum() / n.sum()
    if pooled <= 0.0 or pooled >= 1.0:
        raise DegenerateDataError("all responses identical; cannot fit a slope")
    if ridge == 0.0:
        _check_separation(points)

    beta = np.array([float(np.log(pooled / (1.0 - pooled))), 0.0])

    def penalized_ll(b: np.ndarray) -> float:
        value = log_likelihood(b[0], b[1], points)
        return value - 0.5 * ridge * float(b @ b)

    current = penalized_ll(beta)
    iterations = 0
    while iterations < max_iterations:
        g = score(beta[0], beta[1], points) - ridge * beta
        if float(np.linalg.norm(g)) < gradient_tol:
            break
        info = observed_information(beta[0], beta[1], points) + ridge * np.eye(2)
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError as exc:
            raise DegenerateDataError(f"singular information matrix ({exc})") from exc
        scale = 1.0
        while scale >= 1e-10:
            candidate = beta + scale * step
            value = penalized_ll(candidate)
            if value > current - 1e-12:
                beta, current = candidate, value
                break
            scale /= 2.0
        else:
            break  # no uphill direction left at float resolution
        iterations += 1
        if float(np.max(np.abs(beta[0] + beta[1] * x))) > _ETA_DIVERGENCE:
            raise SeparationError(
                "separation suspected: |beta1| diverging, fitted probabilities "
                "saturating at the data levels"
            )

    g = score(beta[0], beta[1], points) - ridge * beta
    converged = bool(np.linalg.norm(g) < gradient_tol)
    info = observed_information(beta[0], beta[1], points) + ridge * np.eye(2)
    covariance = np.linalg.inv(info)
    covariance.setflags(write=False)
    return LogisticFit(
        beta0=float(beta[0]),
        beta1=float(beta[1]),
        covariance=covariance,
        n_points=len(points),
        log_likelihood=log_likelihood(beta[0], beta[1], points),
        converged=converged,
        iterations=iterations,
        collapse=collapse_rule,
    )


def predict(fit: LogisticFit, level):
    """Fitted probability at a level (scalar or array)."""
    value = expit(fit.beta0 + fit.beta1 * np.asarray(level, dtype=float))
    return float(value) if np.isscalar(level) or np.ndim(level) == 0 else value


def odds_ratio(p: float) -> float:
    """Odds of success against failure, p / (1 - p)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"odds are undefined at p={p}; need 0 < p < 1")
    return p / (1.0 - p)


def confidence_band(
    fit: LogisticFit,
    levels: Iterable[float],
    risk_ratio: float = DEFAULT_RISK_RATIO,
) -> ConfidenceBand:
    """Wald band on the linear predictor, mapped back to probabilities.

    At each level x the band is eta +- z * sqrt([1 x] Cov [1 x]^T) with z
    the (1 - risk_ratio/2) normal quantile; bounds transform through the
    logistic, which makes this equally a band on the log odds.
    """
    if not fit.converged:
        raise NotConvergedError("confidence band requires a converged fit")
    if not 0.0 < risk_ratio < 1.0:
        raise ValueError("risk ratio must lie in (0, 1)")
    z = float(norm.ppf(1.0 - risk_ratio / 2.0))
    pts = []
    for level in levels:
        a = np.array([1.0, float(level)])
        eta = fit.beta0 + fit.beta1 * float(level)
        variance = float(a @ fit.covariance @ a)
        half = z * float(np.sqrt(max(variance, 0.0)))
        pts.append(
            BandPoint(
                level=float(level),
                p_fit=float(expit(eta)),
                p_low=float(expit(eta - half)),
                p_high=float(expit(eta + half)),
            )
        )
    return ConfidenceBand(risk_ratio=risk_ratio, points=tuple(pts))


def outside_band(
    points: Sequence[BinomialPoint], band: ConfidenceBand
) -> list[tuple[float, bool]]:
    """Flag each observed level: inside the band (True) or outside it.

    Raises KeyError when a point's level has no band entry.
    """
    flags = []
    for point in points:
        bp = band.at(point.level)
        inside = bp.p_low <= point.proportion <= bp.p_high
        flags.append((point.level, inside))
    return flags


# --- reporting -------------------------------------------------------------

def fit_report(
    fit: LogisticFit,
    points: Sequence[BinomialPoint],
    band: ConfidenceBand,
) -> dict:
    """Structured summary: parameters, covariance, per-level table, flags."""
    inside = dict(outside_band(points, band))
    se = np.sqrt(np.diag(fit.covariance))
    levels = []
    for point in points:
        bp = band.at(point.level)
        levels.append(
            {
                "level": point.level,
                "successes": point.successes,
                "trials": point.trials,
                "proportion": point.proportion,
                "p_fit": bp.p_fit,
                "p_low": bp.p_low,
                "p_high": bp.p_high,
                "inside": inside[point.level],
            }
        )
    return {
        "collapse": fit.collapse.value if fit.collapse else None,
        "beta0": fit.beta0,
        "beta1": fit.beta1,
        "se_beta0": float(se[0]),
        "se_beta1": float(se[1]),
        "covariance": [[float(v) for v in row] for row in fit.covariance],
        "log_likelihood": fit.log_likelihood,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "n_points": fit.n_points,
        "pse": fit.pse if fit.beta1 != 0 else None,
        "risk_ratio": band.risk_ratio,
        "levels": levels,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


def curve_table(fit: LogisticFit, band: ConfidenceBand) -> str:
    """Dense curve-plus-band samples as tab-separated text."""
    lines = ["level\tp_fit\tp_low\tp_high"]
    for bp in band.points:
        lines.append(f"{bp.level:.6g}\t{bp.p_fit:.6f}\t{bp.p_low:.6f}\t{bp.p_high:.6f}")
    return "\n".join(lines) + "\n"


def points_table(points: Sequence[BinomialPoint], band: ConfidenceBand) -> str:
    inside = dict(outside_band(points, band))
    lines = ["level\tsuccesses\ttrials\tproportion\tinside"]
    for p in points:
        lines.append(
            f"{p.level:.6g}\t{p.successes}\t{p.trials}\t{p.proportion:.6f}\t"
            f"{'yes' if inside[p.level] else 'no'}"
        )
    return "\n".join(lines) + "\n"


# --- plotting --------------------------------------------------------------

_SVG_W, _SVG_H = 640, 440
_ML, _MR, _MT, _MB = 64, 20, 28, 52  # margins


def plot_svg(
    fit: LogisticFit,
    points: Sequence[BinomialPoint],
    risk_ratio: float = DEFAULT_RISK_RATIO,
    x_label: str = "level [ms]",
    y_label: str = "probability",
    title: str = "",
    curve_samples: int = 201,
) -> str:
    """Minimal deterministic SVG: observed circles, solid fitted curve,
    broken-line confidence zone."""
    xs = [p.level for p in points]
    lo, hi = min(xs), max(xs)
    pad = 0.04 * (hi - lo or 1.0)
    x0, x1 = lo - pad, hi + pad
    dense = np.linspace(x0, x1, curve_samples)
    band = confidence_band(fit, dense, risk_ratio)

    def sx(x: float) -> float:
        return _ML + (x - x0) / (x1 - x0) * (_SVG_W - _ML - _MR)

    def sy(p: float) -> float:
        return _SVG_H - _MB - p * (_SVG_H - _MT - _MB)

    def path(values: Iterable[tuple[float, float]]) -> str:
        return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in values)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_SVG_W / 2:.0f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )
    # axes
    parts.append(
        f'<line x1="{_ML}" y1="{sy(0):.2f}" x2="{_SVG_W - _MR}" y2="{sy(0):.2f}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{_ML}" y1="{sy(0):.2f}" x2="{_ML}" y2="{sy(1):.2f}" stroke="black"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        parts.append(f'<line x1="{_ML - 4}" y1="{y:.2f}" x2="{_ML}" y2="{y:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{_ML - 8}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{frac:g}</text>'
        )
    for x in xs:
        parts.append(
            f'<line x1="{sx(x):.2f}" y1="{sy(0):.2f}" x2="{sx(x):.2f}" '
            f'y2="{sy(0) + 4:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{sx(x):.2f}" y="{sy(0) + 18:.2f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{x:g}</text>'
        )
    parts.append(
        f'<text x="{(_ML + _SVG_W - _MR) / 2:.0f}" y="{_SVG_H - 14}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{(_MT + _SVG_H - _MB) / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(_MT + _SVG_H - _MB) / 2:.0f})">{y_label}</text>'
    )
    # confidence zone as broken lines, fitted curve solid
    parts.append(
        f'<polyline fill="none" stroke="black" stroke-dasharray="6 4" '
        f'points="{path((bp.level, bp.p_low) for bp in band.points)}"/>'
    )
    parts.append(
        f'<polyline fill="none" stroke="black" stroke-dasharray="6 4" '
        f'points="{path((bp.level, bp.p_high) for bp in band.points)}"/>'
    )
    parts.append(
        f'<polyline fill="none" stroke="black" stroke-width="1.5" '
        f'points="{path((bp.level, bp.p_fit) for bp in band.points)}"/>'
    )
    for p in points:
        parts.append(
            f'<circle cx="{sx(p.level):.2f}" cy="{sy(p.proportion):.2f}" r="4" '
            f'fill="white" stroke="black" stroke-width="1.2"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
