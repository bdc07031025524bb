"""Constant-stimuli sessions: schedules, three-grade responses, logs, tallies.

A design fixes a reference pair, a set of test pairs with one scalar level
each (tactile duration, or onset difference), a repetition count and the
three judgment labels. A session is a seeded random schedule over the test
pairs plus the responses collected so far; partial sessions are legal.
Logs serialize to line-delimited JSON records (header, trials, responses)
and several logs can be merged at tally time to pool participants.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .kansei_graph import Modality
from .stimulus import SignalSpec, StimulusPair, experiment1_grid, experiment2_grid

DEFAULT_REPETITIONS = 5
DEFAULT_GAP_MS = 700
DEFAULT_ITI_MS = 1500


class Grade(str, Enum):
    """Canonical three-grade judgment; designs map these onto display labels."""

    LOWER = "lower"
    SAME = "same"
    HIGHER = "higher"


GRADES = (Grade.LOWER, Grade.SAME, Grade.HIGHER)


class UnknownTrialError(ValueError):
    pass


class DuplicateResponseError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentDesign:
    """A constant-stimuli design over one manipulated scalar level."""

    id: str
    reference: StimulusPair
    test_pairs: tuple[StimulusPair, ...]
    repetitions: int
    levels: dict[str, float]  # pair id -> manipulated level (ms)
    judgment_labels: tuple[str, str, str]
    gap_ms: int = DEFAULT_GAP_MS  # reference-to-test silence within a trial
    iti_ms: int = DEFAULT_ITI_MS

    def __post_init__(self) -> None:
        if not self.test_pairs:
            raise ValueError("a design needs at least one test pair")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        values = [self.levels[p.id] for p in self.test_pairs]
        if len(set(values)) != len(values):
            raise ValueError("levels must be pairwise distinct")

    def level_of(self, pair_id: str) -> float:
        return self.levels[pair_id]

    def pair(self, pair_id: str) -> StimulusPair:
        if pair_id == self.reference.id:
            return self.reference
        for p in self.test_pairs:
            if p.id == pair_id:
                return p
        raise KeyError(pair_id)

    def label_for(self, grade: Grade) -> str:
        return self.judgment_labels[GRADES.index(grade)]

    def grade_for_label(self, label: str) -> Grade:
        return GRADES[self.judgment_labels.index(label)]


@dataclass(frozen=True)
class Trial:
    index: int
    pair_id: str
    repetition: int  # which occurrence of this pair, 0-based in schedule order


@dataclass(frozen=True)
class Response:
    trial_index: int
    grade: Grade
    latency_ms: float | None = None
    at: str | None = None  # ISO timestamp; None for simulated sessions


@dataclass
class SessionLog:
    """One participant's pass through a schedule; single writer at a time."""

    design_id: str
    participant_id: str
    seed: int
    schedule: tuple[Trial, ...]
    responses: list[Response] = field(default_factory=list)
    started_at: str | None = None

    def record(
        self,
        trial_index: int,
        grade: Grade | str,
        latency_ms: float | None = None,
        at: str | None = None,
    ) -> "SessionLog":
        """Append one response; rejects unknown indices and double answers."""
        if not 0 <= trial_index < len(self.schedule):
            raise UnknownTrialError(
                f"trial index {trial_index} outside schedule of {len(self.schedule)}"
            )
        if any(r.trial_index == trial_index for r in self.responses):
            raise DuplicateResponseError(f"trial {trial_index} already answered")
        self.responses.append(Response(trial_index, Grade(grade), latency_ms, at))
        return self

    def response_for(self, trial_index: int) -> Response | None:
        for r in self.responses:
            if r.trial_index == trial_index:
                return r
        return None

    @property
    def answered(self) -> int:
        return len(self.responses)

    @property
    def is_complete(self) -> bool:
        return self.answered == len(self.schedule)

    def first_unanswered(self) -> int | None:
        answered = {r.trial_index for r in self.responses}
        for t in self.schedule:
            if t.index not in answered:
                return t.index
        return None


def make_schedule(design: ExperimentDesign, seed: int) -> tuple[Trial, ...]:
    """Uniform random permutation of the pairs-times-repetitions multiset.

    Fully determined by the seed: same seed, same schedule. The repetition
    index counts prior occurrences of the same pair within the shuffle.
    """
    pair_ids = [p.id for p in design.test_pairs for _ in range(design.repetitions)]
    rng = random.Random(seed)
    rng.shuffle(pair_ids)
    seen: dict[str, int] = {}
    schedule = []
    for i, pid in enumerate(pair_ids):
        rep = seen.get(pid, 0)
        seen[pid] = rep + 1
        schedule.append(Trial(index=i, pair_id=pid, repetition=rep))
    return tuple(schedule)


def new_session(
    design: ExperimentDesign,
    participant_id: str,
    seed: int,
    started_at: str | None = None,
) -> SessionLog:
    return SessionLog(
        design_id=design.id,
        participant_id=participant_id,
        seed=seed,
        schedule=make_schedule(design, seed),
        started_at=started_at,
    )


@dataclass
class GradeCounts:
    lower: int = 0
    same: int = 0
    higher: int = 0

    @property
    def total(self) -> int:
        return self.lower + self.same + self.higher


def tally(
    logs: SessionLog | Iterable[SessionLog], design: ExperimentDesign
) -> dict[float, GradeCounts]:
    """Per-level grade counts, merged over the given logs.

    Unanswered trials contribute nothing; every design level appears in the
    table even when empty, so an empty log yields an all-zero table. The
    result does not depend on response arrival order.
    """
    if isinstance(logs, SessionLog):
        logs = [logs]
    table = {design.level_of(p.id): GradeCounts() for p in design.test_pairs}
    for log in logs:
        if log.design_id != design.id:
            raise ValueError(
                f"log for design {log.design_id!r} tallied against {design.id!r}"
            )
        for r in log.responses:
            level = design.level_of(log.schedule[r.trial_index].pair_id)
            counts = table[level]
            if r.grade is Grade.LOWER:
                counts.lower += 1
            elif r.grade is Grade.SAME:
                counts.same += 1
            else:
                counts.higher += 1
    return dict(sorted(table.items()))


def tally_text(table: Mapping[float, GradeCounts], labels: tuple[str, str, str]) -> str:
    """Tab-separated tally table for downstream fitting or inspection."""
    header = "\t".join(["level_ms", *labels, "total"])
    lines = [header]
    for level, counts in table.items():
        lines.append(
            "\t".join(
                [f"{level:g}", str(counts.lower), str(counts.same),
                 str(counts.higher), str(counts.total)]
            )
        )
    return "\n".join(lines) + "\n"


# --- experiment designs ----------------------------------------------------

def experiment1_design(repetitions: int = DEFAULT_REPETITIONS) -> ExperimentDesign:
    """Tactile-duration design: levels are the tactile attenuation times."""
    pairs, reference = experiment1_grid()
    return ExperimentDesign(
        id="exp1",
        reference=reference,
        test_pairs=tuple(pairs),
        repetitions=repetitions,
        levels={p.id: p.tactile.duration_ms for p in pairs},
        judgment_labels=("Shorter", "Same", "Longer"),
    )


def experiment2_design(repetitions: int = DEFAULT_REPETITIONS) -> ExperimentDesign:
    """Onset-difference design: levels are tactile-minus-auditory onsets."""
    pairs, reference = experiment2_grid()
    return ExperimentDesign(
        id="exp2",
        reference=reference,
        test_pairs=tuple(pairs),
        repetitions=repetitions,
        levels={p.id: p.tactile.onset_ms - p.auditory.onset_ms for p in pairs},
        judgment_labels=("Earlier", "Same", "Later"),
    )


def builtin_designs() -> dict[str, ExperimentDesign]:
    designs = [experiment1_design(), experiment2_design()]
    return {d.id: d for d in designs}


# --- serialization ---------------------------------------------------------

def _spec_to_dict(spec: SignalSpec) -> dict:
    return {
        "modality": spec.modality.value,
        "frequency_hz": spec.frequency_hz,
        "duration_ms": spec.duration_ms,
        "onset_ms": spec.onset_ms,
        "peak_amplitude": spec.peak_amplitude,
    }


def _spec_from_dict(data: dict) -> SignalSpec:
    return SignalSpec(
        modality=Modality(data["modality"]),
        frequency_hz=data["frequency_hz"],
        duration_ms=data["duration_ms"],
        onset_ms=data.get("onset_ms", 0.0),
        peak_amplitude=data.get("peak_amplitude", 0.8),
    )


def _pair_to_dict(pair: StimulusPair) -> dict:
    return {
        "id": pair.id,
        "auditory": _spec_to_dict(pair.auditory),
        "tactile": _spec_to_dict(pair.tactile),
    }


def _pair_from_dict(data: dict) -> StimulusPair:
    return StimulusPair(
        id=data["id"],
        auditory=_spec_from_dict(data["auditory"]),
        tactile=_spec_from_dict(data["tactile"]),
    )


def design_to_dict(design: ExperimentDesign) -> dict:
    return {
        "id": design.id,
        "reference": _pair_to_dict(design.reference),
        "test_pairs": [_pair_to_dict(p) for p in design.test_pairs],
        "repetitions": design.repetitions,
        "levels": design.levels,
        "judgment_labels": list(design.judgment_labels),
        "gap_ms": design.gap_ms,
        "iti_ms": design.iti_ms,
    }


def design_from_dict(data: dict) -> ExperimentDesign:
    return ExperimentDesign(
        id=data["id"],
        reference=_pair_from_dict(data["reference"]),
        test_pairs=tuple(_pair_from_dict(p) for p in data["test_pairs"]),
        repetitions=data["repetitions"],
        levels={k: float(v) for k, v in data["levels"].items()},
        judgment_labels=tuple(data["judgment_labels"]),
        gap_ms=data.get("gap_ms", DEFAULT_GAP_MS),
        iti_ms=data.get("iti_ms", DEFAULT_ITI_MS),
    )


def log_to_lines(log: SessionLog) -> list[str]:
    """One JSON record per line: header first, then trials, then responses."""
    dumps = lambda obj: json.dumps(obj, separators=(",", ":"))
    lines = [
        dumps(
            {
                "record": "header",
                "design_id": log.design_id,
                "participant_id": log.participant_id,
                "seed": log.seed,
                "started_at": log.started_at,
            }
        )
    ]
    for t in log.schedule:
        lines.append(
            dumps({"record": "trial", "index": t.index, "pair_id": t.pair_id,
                   "repetition": t.repetition})
        )
    for r in log.responses:
        lines.append(
            dumps({"record": "response", "trial_index": r.trial_index,
                   "grade": r.grade.value, "latency_ms": r.latency_ms, "at": r.at})
        )
    return lines


def logs_to_text(logs: Iterable[SessionLog]) -> str:
    lines: list[str] = []
    for log in logs:
        lines.extend(log_to_lines(log))
    return "\n".join(lines) + "\n"


def save_logs(logs: SessionLog | Iterable[SessionLog], path: str | Path) -> None:
    if isinstance(logs, SessionLog):
        logs = [logs]
    Path(path).write_text(logs_to_text(logs), encoding="utf-8")


def parse_logs(text: str) -> list[SessionLog]:
    """Inverse of logs_to_text; a header record starts a new session."""
    logs: list[SessionLog] = []
    schedule: list[Trial] = []
    pending: dict | None = None

    def finish() -> None:
        nonlocal pending, schedule
        if pending is None:
            return
        log = SessionLog(
            design_id=pending["design_id"],
            participant_id=pending["participant_id"],
            seed=pending["seed"],
            schedule=tuple(schedule),
            started_at=pending.get("started_at"),
        )
        for r in pending["responses"]:
            log.responses.append(
                Response(r["trial_index"], Grade(r["grade"]),
                         r.get("latency_ms"), r.get("at"))
            )
        logs.append(log)
        pending, schedule = None, []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: not a JSON record ({exc})") from exc
        kind = record.get("record")
        if kind == "header":
            finish()
            pending = {**record, "responses": []}
        elif pending is None:
            raise ValueError(f"line {lineno}: {kind!r} record before any header")
        elif kind == "trial":
            schedule.append(
                Trial(record["index"], record["pair_id"], record["repetition"])
            )
        elif kind == "response":
            pending["responses"].append(record)
        else:
            raise ValueError(f"line {lineno}: unknown record kind {kind!r}")
    finish()
    return logs


def load_logs(path: str | Path) -> list[SessionLog]:
    return parse_logs(Path(path).read_text(encoding="utf-8"))
