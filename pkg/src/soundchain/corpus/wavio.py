"""RIFF / PCM16 mono WAV reading and writing.

Files are written as signed 16-bit little-endian mono. Reading is strict: a
file whose rate or channel count differs from what the caller expects is
rejected instead of converted.
"""

from __future__ import annotations

import logging
import wave
from pathlib import Path

import numpy as np

from ..errors import AudioIoError, ChannelMismatch, SampleRateMismatch
from .clip import MODEL_LENGTH, SAMPLE_RATE, Label, WaveformClip, fit_length

log = logging.getLogger(__name__)

_FULL_SCALE = 32767.0


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.round(x * _FULL_SCALE).astype("<i2")


def from_pcm16(data: np.ndarray) -> np.ndarray:
    return (data.astype(np.float32) / np.float32(_FULL_SCALE)).clip(-1.0, 1.0)


def write_wav(path, samples, sample_rate: int = SAMPLE_RATE) -> None:
    path = Path(path)
    try:
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(int(sample_rate))
            w.writeframes(to_pcm16(samples).tobytes())
    except OSError as exc:
        raise AudioIoError(f"cannot write {path}: {exc}") from exc


def read_wav(path, expected_sr: int = SAMPLE_RATE) -> np.ndarray:
    """Read a PCM16 mono file into float32 samples in [-1, 1]."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            raw = w.readframes(w.getnframes())
    except (OSError, EOFError, wave.Error) as exc:
        raise AudioIoError(f"cannot read {path}: {exc}") from exc
    if width != 2:
        raise AudioIoError(f"{path}: only 16-bit PCM is supported (sample width {width})")
    if channels != 1:
        raise ChannelMismatch(f"{path}: expected mono, got {channels} channels")
    if rate != expected_sr:
        raise SampleRateMismatch(f"{path}: expected {expected_sr} Hz, got {rate} Hz")
    return from_pcm16(np.frombuffer(raw, dtype="<i2"))


def ingest_wav_dir(path, expected_sr: int = SAMPLE_RATE, length: int = MODEL_LENGTH):
    """Load every ``*.wav`` in ``path`` (sorted by name) as an unlabeled clip.

    Returns ``(clips, n_adjusted)`` where ``n_adjusted`` counts files that had
    to be padded or truncated to ``length``.
    """
    path = Path(path)
    if not path.is_dir():
        raise AudioIoError(f"not a directory: {path}")
    clips = []
    n_adjusted = 0
    for f in sorted(path.glob("*.wav")):
        samples, changed = fit_length(read_wav(f, expected_sr), length)
        n_adjusted += changed
        clips.append(WaveformClip(samples, id=f.stem, label=Label.UNKNOWN,
                                  sample_rate=expected_sr, meta={"path": str(f)}))
    if n_adjusted:
        log.warning("%d of %d files in %s padded or truncated to %d samples",
                    n_adjusted, len(clips), path, length)
    return clips, n_adjusted
