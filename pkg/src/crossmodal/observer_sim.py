"""Simulated participants for end-to-end verification without human subjects.

An observer model carries ground-truth log-odds parameters for the "lower"
judgment as a function of the manipulated level, a dead zone of half-width
``same_zone`` on the log-odds scale that produces "same" responses, and a
lapse rate for uniformly random answers. With the dead zone at zero the
"lower" rate at each level is exactly logistic(beta0 + beta1 * level), so
fits on simulated sessions can be checked against known parameters.

Grade probabilities follow the cumulative-logistic form: lower with
probability expit(eta - same_zone), higher with probability
1 - expit(eta + same_zone), same in between. Responses are reproducible
from the model seed alone; each observer owns its random stream.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .session import (
    GRADES,
    ExperimentDesign,
    Grade,
    SessionLog,
    make_schedule,
)


@dataclass(frozen=True)
class ObserverModel:
    beta0: float
    beta1: float
    same_zone: float = 0.0  # half-width of the "same" zone in log-odds
    lapse_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.same_zone < 0:
            raise ValueError("same_zone must be non-negative")
        if not 0.0 <= self.lapse_rate < 1.0:
            raise ValueError("lapse_rate must lie in [0, 1)")


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def respond(model: ObserverModel, level: float, rng: random.Random) -> Grade:
    """Draw one three-grade judgment at the given level."""
    if model.lapse_rate > 0.0 and rng.random() < model.lapse_rate:
        return GRADES[rng.randrange(3)]
    eta = model.beta0 + model.beta1 * level
    u = rng.random()
    if u < _expit(eta - model.same_zone):
        return Grade.LOWER
    if u < _expit(eta + model.same_zone):
        return Grade.SAME
    return Grade.HIGHER


class Observer:
    """Binds a model to its own random stream, seeded from the model."""

    def __init__(self, model: ObserverModel):
        self.model = model
        self._rng = random.Random(model.seed)

    def respond(self, level: float) -> Grade:
        return respond(self.model, level, self._rng)


def run_synthetic_session(
    design: ExperimentDesign,
    model: ObserverModel,
    seed: int,
    participant_id: str = "sim",
) -> SessionLog:
    """Schedule with the session seed, answer every trial with the observer.

    Twice the same (seed, model) gives byte-identical logs: no timestamps
    or latencies are recorded.
    """
    log = SessionLog(
        design_id=design.id,
        participant_id=participant_id,
        seed=seed,
        schedule=make_schedule(design, seed),
    )
    observer = Observer(model)
    for trial in log.schedule:
        grade = observer.respond(design.level_of(trial.pair_id))
        log.record(trial.index, grade)
    return log


def run_panel(
    design: ExperimentDesign,
    model: ObserverModel,
    observers: int,
    seed: int,
) -> list[SessionLog]:
    """Independent observers drawn from one base seed, one log each."""
    spawner = random.Random(seed)
    logs = []
    for i in range(observers):
        session_seed = spawner.getrandbits(48)
        observer_seed = spawner.getrandbits(48)
        member = ObserverModel(
            beta0=model.beta0,
            beta1=model.beta1,
            same_zone=model.same_zone,
            lapse_rate=model.lapse_rate,
            seed=observer_seed,
        )
        logs.append(
            run_synthetic_session(design, member, session_seed, f"sim-{i:03d}")
        )
    return logs
