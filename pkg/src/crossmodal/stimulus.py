"""Sample-accurate synthesis of paired auditory and tactile test signals.

Each signal is a fixed-frequency sine under a linear decay envelope: the
amplitude falls from its peak to zero over the stated duration (the
"attenuation time") and stays zero afterwards. Pairs place one auditory and
one tactile signal on a shared clock so their onsets can be offset against
each other. Two ready-made grids cover the standard designs: one varies the
tactile duration against a fixed 120 ms sound, the other varies the tactile
onset against a simultaneous reference.

The tactile channel is synthesized with the same math as the audio channel
and delivered as file data only; driving actuator hardware is out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.io import wavfile

from .kansei_graph import Modality

DEFAULT_SAMPLE_RATE = 48_000
MIN_SAMPLE_RATE = 8_000
CARRIER_HZ = 250.0
REFERENCE_DURATION_MS = 120.0
DEFAULT_PEAK = 0.8

EXPERIMENT1_DURATIONS_MS = (40, 60, 80, 100, 120, 150, 180, 210, 240)
EXPERIMENT2_OFFSETS_MS = (-100, -80, -60, -40, -20, 0, 10, 20, 30, 40, 50)


@dataclass(frozen=True)
class SignalSpec:
    """One single-channel signal: sine carrier, linear decay to zero.

    ``duration_ms`` is the attenuation time; the envelope reaches zero
    amplitude exactly there. ``onset_ms`` is relative to the pair epoch and
    may be negative before rendering normalizes it.
    """

    modality: Modality
    frequency_hz: float
    duration_ms: float
    onset_ms: float = 0.0
    peak_amplitude: float = DEFAULT_PEAK

    def __post_init__(self) -> None:
        if self.frequency_hz <= 0:
            raise ValueError(f"frequency must be positive, got {self.frequency_hz}")
        if self.duration_ms <= 0:
            raise ValueError(f"duration must be positive, got {self.duration_ms}")
        if not 0 < self.peak_amplitude <= 1:
            raise ValueError(
                f"peak amplitude must lie in (0, 1], got {self.peak_amplitude}"
            )


@dataclass(frozen=True)
class StimulusPair:
    id: str
    auditory: SignalSpec
    tactile: SignalSpec

    def __post_init__(self) -> None:
        if self.auditory.modality is not Modality.AUDITION:
            raise ValueError("auditory channel must carry an Audition spec")
        if self.tactile.modality is not Modality.TOUCH:
            raise ValueError("tactile channel must carry a Touch spec")


@dataclass(frozen=True, eq=False)
class RenderedPair:
    """Two equal-length channels on a common clock; channel 0 is auditory.

    ``epoch_shift_ms`` was added to both onsets so the earliest one lands
    at time zero. Buffers are read-only.
    """

    sample_rate: int
    channels: np.ndarray  # shape (2, n), float64 in [-1, 1]
    epoch_shift_ms: float

    @property
    def auditory(self) -> np.ndarray:
        return self.channels[0]

    @property
    def tactile(self) -> np.ndarray:
        return self.channels[1]


def _sample_count(duration_ms: float, sample_rate: int) -> int:
    # Samples with t = n / rate strictly inside [0, duration); the 1e-9 pad
    # keeps float dust from adding a sample when duration * rate is integral.
    return math.ceil(duration_ms / 1000.0 * sample_rate - 1e-9)


def synthesize(spec: SignalSpec, sample_rate: int = DEFAULT_SAMPLE_RATE) -> np.ndarray:
    """Render one spec: peak * (1 - t/duration) * sin(2*pi*f*t) on [0, duration).

    The returned array covers exactly the nonzero region; the signal is zero
    at and after the attenuation time by definition.
    """
    if sample_rate < MIN_SAMPLE_RATE:
        raise ValueError(f"sample rate must be at least {MIN_SAMPLE_RATE} Hz")
    n = _sample_count(spec.duration_ms, sample_rate)
    t = np.arange(n) / sample_rate
    duration_s = spec.duration_ms / 1000.0
    envelope = 1.0 - t / duration_s
    samples = spec.peak_amplitude * (np.sin(2.0 * np.pi * spec.frequency_hz * t) * envelope)
    samples.setflags(write=False)
    return samples


def render_pair(
    pair: StimulusPair,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    tail_ms: float = 0.0,
) -> RenderedPair:
    """Place both channels on a shared clock starting at the earliest onset."""
    if tail_ms < 0:
        raise ValueError("tail must be non-negative")
    specs = (pair.auditory, pair.tactile)
    epoch_shift = max(0.0, -min(s.onset_ms for s in specs))
    starts = [round((s.onset_ms + epoch_shift) / 1000.0 * sample_rate) for s in specs]
    signals = [synthesize(s, sample_rate) for s in specs]
    total = max(st + len(sig) for st, sig in zip(starts, signals))
    total += round(tail_ms / 1000.0 * sample_rate)
    channels = np.zeros((2, total))
    for row, (start, sig) in enumerate(zip(starts, signals)):
        channels[row, start : start + len(sig)] = sig
    channels.setflags(write=False)
    return RenderedPair(sample_rate=sample_rate, channels=channels, epoch_shift_ms=epoch_shift)


def _pair(
    pair_id: str,
    aud_duration_ms: float,
    tac_duration_ms: float,
    tac_onset_ms: float = 0.0,
    aud_peak: float = DEFAULT_PEAK,
    tac_peak: float = DEFAULT_PEAK,
) -> StimulusPair:
    return StimulusPair(
        id=pair_id,
        auditory=SignalSpec(Modality.AUDITION, CARRIER_HZ, aud_duration_ms, 0.0, aud_peak),
        tactile=SignalSpec(Modality.TOUCH, CARRIER_HZ, tac_duration_ms, tac_onset_ms, tac_peak),
    )


def experiment1_grid(
    aud_peak: float = DEFAULT_PEAK, tac_peak: float = DEFAULT_PEAK
) -> tuple[list[StimulusPair], StimulusPair]:
    """Nine simultaneous pairs varying tactile duration, plus the reference.

    Sound is fixed at 120 ms; tactile durations run over
    {40, 60, 80, 100, 120, 150, 180, 210, 240} ms. The reference is the
    simultaneous 120/120 pair.
    """
    reference = _pair("ref", REFERENCE_DURATION_MS, REFERENCE_DURATION_MS,
                      aud_peak=aud_peak, tac_peak=tac_peak)
    pairs = [
        _pair(f"dur{d:03d}", REFERENCE_DURATION_MS, float(d),
              aud_peak=aud_peak, tac_peak=tac_peak)
        for d in EXPERIMENT1_DURATIONS_MS
    ]
    return pairs, reference


def experiment2_grid(
    aud_peak: float = DEFAULT_PEAK, tac_peak: float = DEFAULT_PEAK
) -> tuple[list[StimulusPair], StimulusPair]:
    """Eleven pairs varying tactile onset, plus the simultaneous reference.

    Both channels last 120 ms; tactile onsets run over
    {-100, -80, -60, -40, -20, 0, 10, 20, 30, 40, 50} ms relative to the
    sound (negative means the vibration leads).
    """
    reference = _pair("ref", REFERENCE_DURATION_MS, REFERENCE_DURATION_MS,
                      aud_peak=aud_peak, tac_peak=tac_peak)
    pairs = [
        _pair(f"soa{o:+04d}", REFERENCE_DURATION_MS, REFERENCE_DURATION_MS, float(o),
              aud_peak=aud_peak, tac_peak=tac_peak)
        for o in EXPERIMENT2_OFFSETS_MS
    ]
    return pairs, reference


def write_wav(rendered: RenderedPair, target, encoding: str = "int16") -> None:
    """Write a 2-channel wave file; channel 0 auditory, channel 1 tactile.

    ``target`` is a path or an open binary file object. ``encoding``
    selects 16-bit PCM ("int16") or 32-bit IEEE float ("float32").
    """
    data = np.ascontiguousarray(rendered.channels.T)
    if encoding == "int16":
        scaled = np.clip(data, -1.0, 1.0) * 32767.0
        frames = np.round(scaled).astype(np.int16)
    elif encoding == "float32":
        frames = data.astype(np.float32)
    else:
        raise ValueError(f"unknown encoding {encoding!r}; use 'int16' or 'float32'")
    if not hasattr(target, "write"):
        target = str(target)
    wavfile.write(target, rendered.sample_rate, frames)


_MANIFEST_COLUMNS = (
    "pair_id",
    "role",
    "aud_frequency_hz",
    "aud_duration_ms",
    "aud_onset_ms",
    "aud_peak",
    "tac_frequency_hz",
    "tac_duration_ms",
    "tac_onset_ms",
    "tac_peak",
)


def manifest_text(pairs: Iterable[StimulusPair], reference: StimulusPair | None = None) -> str:
    """Tab-separated table of pair id to synthesis parameters."""
    def fmt(value: float) -> str:
        return f"{value:g}"

    lines = ["\t".join(_MANIFEST_COLUMNS)]
    rows = []
    if reference is not None:
        rows.append((reference, "reference"))
    rows.extend((p, "test") for p in pairs)
    for pair, role in rows:
        a, t = pair.auditory, pair.tactile
        lines.append(
            "\t".join(
                [
                    pair.id,
                    role,
                    fmt(a.frequency_hz),
                    fmt(a.duration_ms),
                    fmt(a.onset_ms),
                    fmt(a.peak_amplitude),
                    fmt(t.frequency_hz),
                    fmt(t.duration_ms),
                    fmt(t.onset_ms),
                    fmt(t.peak_amplitude),
                ]
            )
        )
    return "\n".join(lines) + "\n"
