from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SAMPLE_RATE = 16000
MODEL_LENGTH = 16384


class Label(str, enum.Enum):
    TV = "TV"
    STV = "STV"
    UNKNOWN = "UNKNOWN"

    @property
    def display(self) -> str:
        return {"TV": "#TV", "STV": "#sTV", "UNKNOWN": "?"}[self.value]


@dataclass(frozen=True)
class SegmentAnnotation:
    """Time marks (seconds) of one #TV / #sTV token.

    ``frication_start_s`` and ``frication_end_s`` are 0 when there is no [s].
    """

    frication_end_s: float
    burst_s: float
    voicing_onset_s: float
    frication_start_s: float = 0.0

    @property
    def vot_ms(self) -> float:
        return 1000.0 * (self.voicing_onset_s - self.burst_s)

    def validate(self, duration_s: float | None = None) -> None:
        if not 0.0 <= self.frication_start_s <= self.frication_end_s <= self.burst_s:
            raise ValueError(f"frication marks out of order: {self}")
        if not self.burst_s < self.voicing_onset_s:
            raise ValueError(f"burst must precede voicing onset: {self}")
        if duration_s is not None and self.voicing_onset_s > duration_s + 1e-12:
            raise ValueError(f"voicing onset beyond clip end: {self}")


@dataclass
class WaveformClip:
    samples: np.ndarray
    id: str
    label: Label = Label.UNKNOWN
    truth: SegmentAnnotation | None = None
    sample_rate: int = SAMPLE_RATE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        self.label = Label(self.label)

    @property
    def length(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return self.length / self.sample_rate

    def validate(self, length: int = MODEL_LENGTH) -> None:
        if self.samples.ndim != 1 or self.length != length:
            raise ValueError(f"{self.id}: expected {length} samples, got {self.samples.shape}")
        if not np.all(np.abs(self.samples) <= 1.0):
            raise ValueError(f"{self.id}: samples outside [-1, 1]")
        if self.truth is not None:
            self.truth.validate(self.duration_s)
            if self.label is Label.STV and not self.truth.frication_end_s > 0:
                raise ValueError(f"{self.id}: #sTV clip without frication")


def fit_length(samples: np.ndarray, length: int = MODEL_LENGTH) -> tuple[np.ndarray, bool]:
    """Zero-pad at the tail or truncate to ``length``; second value flags a change."""
    samples = np.asarray(samples, dtype=np.float32)
    n = samples.shape[0]
    if n == length:
        return samples, False
    if n > length:
        return samples[:length].copy(), True
    out = np.zeros(length, dtype=np.float32)
    out[:n] = samples
    return out, True
