"""Invert a fitted psychometric curve into concrete design settings.

Given a converged logistic fit and a target judgment probability, the
solver returns the level that reaches the target, with an uncertainty
interval read off the confidence band: the set of levels whose band still
contains the target probability. Recommendations clamp the solved level to
the tested design range by default, since the model is only trusted where
it was measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import norm

from .kansei_graph import CrossModalOpportunity
from .psychometrics import DEFAULT_RISK_RATIO, LogisticFit, NotConvergedError, predict


@dataclass(frozen=True)
class SolvedLevel:
    level: float
    target_p: float
    interval: tuple[float, float]  # may extend to +-inf when the band is weak
    risk_ratio: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class Recommendation:
    opportunity: CrossModalOpportunity | None
    solved: SolvedLevel
    design_range: tuple[float, float]
    level: float  # solved level after clamping
    clamped: bool
    achieved_p: float
    warnings: tuple[str, ...]
    summary: str


def solve_level(
    fit: LogisticFit, target_p: float, risk_ratio: float = DEFAULT_RISK_RATIO
) -> SolvedLevel:
    """Level whose fitted probability equals the target, with its band interval.

    The point solution is (logit(target) - beta0) / beta1. The interval is
    the set of levels at which the confidence band still contains the
    target probability; on the log-odds scale that set is a quadratic
    inequality in the level, so it comes out in closed form. When the
    band nowhere excludes the target the interval is unbounded and a
    warning is attached.
    """
    if not fit.converged:
        raise NotConvergedError("solve_level requires a converged fit")
    if not 0.0 < target_p < 1.0:
        raise ValueError("target probability must lie strictly between 0 and 1")
    if fit.beta1 == 0.0:
        raise ValueError("slope is zero: the level has no leverage on the judgment")

    logit_target = math.log(target_p / (1.0 - target_p))
    level = (logit_target - fit.beta0) / fit.beta1

    z = float(norm.ppf(1.0 - risk_ratio / 2.0))
    v = fit.covariance
    # |eta(x) - L| <= z * sqrt(v(x)) as a quadratic a x^2 + b x + c <= 0.
    a = fit.beta1**2 - z**2 * float(v[1, 1])
    b = 2.0 * (fit.beta1 * (fit.beta0 - logit_target) - z**2 * float(v[0, 1]))
    c = (fit.beta0 - logit_target) ** 2 - z**2 * float(v[0, 0])

    warnings: list[str] = []
    if a > 0.0:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:  # numerically impossible since the point solution qualifies
            disc = 0.0
        root = math.sqrt(disc)
        interval = ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a))
    else:
        interval = (-math.inf, math.inf)
        warnings.append(
            "slope is not significant at this risk ratio; the band never "
            "excludes the target, so the interval is unbounded"
        )
    return SolvedLevel(
        level=level,
        target_p=target_p,
        interval=interval,
        risk_ratio=risk_ratio,
        warnings=tuple(warnings),
    )


def recommend(
    fit: LogisticFit,
    target_p: float,
    design_range: tuple[float, float],
    opportunity: CrossModalOpportunity | None = None,
    risk_ratio: float = DEFAULT_RISK_RATIO,
    allow_extrapolation: bool = False,
) -> Recommendation:
    """Solve for the target and turn it into an actionable setting.

    The solved level is clamped to the tested range unless extrapolation is
    explicitly allowed; a clamp means the target is unreachable inside the
    range and the achieved probability at the clamped level is reported
    instead.
    """
    lo, hi = design_range
    if lo > hi:
        raise ValueError("design range must be (low, high)")
    solved = solve_level(fit, target_p, risk_ratio)
    warnings = list(solved.warnings)

    level = solved.level
    clamped = False
    if not allow_extrapolation and not lo <= level <= hi:
        level = min(max(level, lo), hi)
        clamped = True
        warnings.append(
            f"target probability {target_p:g} is unreachable within the tested "
            f"range [{lo:g}, {hi:g}]; clamped to {level:g}"
        )
    achieved = predict(fit, level)

    summary = _summary(opportunity, solved, level, clamped, achieved, (lo, hi))
    return Recommendation(
        opportunity=opportunity,
        solved=solved,
        design_range=(lo, hi),
        level=level,
        clamped=clamped,
        achieved_p=achieved,
        warnings=tuple(warnings),
        summary=summary,
    )


def _summary(
    opportunity: CrossModalOpportunity | None,
    solved: SolvedLevel,
    level: float,
    clamped: bool,
    achieved: float,
    design_range: tuple[float, float],
) -> str:
    if opportunity is not None:
        channel = opportunity.candidate_manipulated_modality.value
        factor = opportunity.conflict.delight_factor
        head = (
            f"For delight factor '{factor}', set the {channel} channel to "
            f"{level:.1f} ms"
        )
    else:
        head = f"Set the manipulated level to {level:.1f} ms"
    if clamped:
        body = (
            f" (clamped to the tested range [{design_range[0]:g}, "
            f"{design_range[1]:g}]); this achieves a judgment probability of "
            f"{achieved:.3f} against the {solved.target_p:g} target."
        )
    else:
        body = f" to reach a judgment probability of {solved.target_p:g}."
    lo, hi = solved.interval
    if math.isfinite(lo) and math.isfinite(hi):
        tail = f" Band-consistent levels: [{lo:.1f}, {hi:.1f}] ms."
    else:
        tail = " The confidence band does not pin down an interval."
    return head + body + tail


def recommendation_report(rec: Recommendation) -> dict:
    """Structured form of a recommendation for serialization."""
    opp = rec.opportunity
    return {
        "delight_factor": opp.conflict.delight_factor if opp else None,
        "modality_pair": sorted(m.value for m in opp.modality_pair) if opp else None,
        "manipulated_modality": (
            opp.candidate_manipulated_modality.value if opp else None
        ),
        "target_probability": rec.solved.target_p,
        "solved_level": rec.solved.level,
        "interval": [
            None if not math.isfinite(v) else v for v in rec.solved.interval
        ],
        "risk_ratio": rec.solved.risk_ratio,
        "level": rec.level,
        "clamped": rec.clamped,
        "achieved_probability": rec.achieved_p,
        "design_range": list(rec.design_range),
        "warnings": list(rec.warnings),
        "summary": rec.summary,
    }
