"""Automatic segmentation of #TV / #sTV tokens.

The annotator looks for an [s] (a long run of high-band, aperiodic, non-silent
frames), then for the release burst (the largest jump in high-band energy),
then for voicing onset (a run of strongly periodic frames). VOT is the
interval between the last two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus.clip import Label, SegmentAnnotation, WaveformClip
from ..errors import NoBurstDetected, NoVoicingDetected, SoundChainError
from .features import AnalyzerConfig, FrameTrack, frame_features


def _runs(mask: np.ndarray):
    """Yield ``(first, last)`` inclusive index pairs of True runs."""
    if mask.size == 0:
        return
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    for a, b in zip(edges[::2], edges[1::2]):
        yield int(a), int(b) - 1


def detect_frication(track: FrameTrack):
    """Earliest frication span as ``(start_s, end_s)``, or None.

    A frame qualifies when its >4 kHz energy share exceeds the band-ratio
    threshold, its RMS exceeds the noise floor by ``fric_floor_factor`` and
    its periodicity is below ``fric_max_periodicity``. Runs separated by at
    most ``fric_max_gap_s`` of non-qualifying frames are merged; the span is
    the first merged run lasting at least ``fric_min_s``.
    """
    cfg = track.config
    floor = track.noise_floor
    mask = ((track.band_ratio > cfg.fric_band_ratio)
            & (track.rms > cfg.fric_floor_factor * floor)
            & (track.rms > 0)
            & (track.periodicity < cfg.fric_max_periodicity))
    gap = int(round(cfg.fric_max_gap_s * track.sample_rate / track.hop))
    runs = list(_runs(mask))
    merged = []
    for a, b in runs:
        if merged and a - merged[-1][1] - 1 <= gap:
            merged[-1][1] = b
        else:
            merged.append([a, b])
    for a, b in merged:
        start = a * track.hop
        end = b * track.hop + track.frame_len
        if (end - start) / track.sample_rate >= cfg.fric_min_s - 1e-12:
            return start / track.sample_rate, end / track.sample_rate
    return None


def detect_voicing_onset(track: FrameTrack, after_s: float = 0.0) -> float:
    """Centre time of the first run of ``voicing_run`` periodic frames at or after ``after_s``.

    Frames are located by their centres, and a frame centred exactly on
    ``after_s`` is eligible.
    """
    cfg = track.config
    centers = track.center_s(np.arange(track.n_frames))
    voiced = (track.periodicity > cfg.voicing_periodicity) & (centers >= after_s - 1e-9)
    for a, b in _runs(voiced):
        if b - a + 1 >= cfg.voicing_run:
            return float(centers[a])
    raise NoVoicingDetected(f"no run of {cfg.voicing_run} periodic frames after {after_s:.4f} s")


def detect_burst(track: FrameTrack, after_s: float = 0.0, before_s: float | None = None) -> float:
    """Release burst time in ``[after_s, before_s)``.

    Candidates are frames whose >4 kHz energy rises over the previous frame
    by more than ``burst_rel_threshold`` of the clip's largest frame energy
    (and ``burst_floor_factor`` times the noise-floor energy) and whose
    spectrum is broadband (band ratio at least ``burst_min_band_ratio``);
    vowel onsets fail the last test. The largest candidate rise locates the
    transient; the returned time is the first sample in that frame and its
    predecessor whose magnitude reaches half the local peak.
    """
    cfg = track.config
    sr = track.sample_rate
    e = track.high_energy
    rise = np.diff(e, prepend=0.0)
    lo = int(np.ceil(after_s * sr / track.hop - 1e-9))
    hi = track.n_frames if before_s is None else int(np.ceil(before_s * sr / track.hop - 1e-9))
    lo, hi = max(lo, 0), min(hi, track.n_frames)
    if hi <= lo:
        raise NoBurstDetected(f"empty search interval [{after_s:.4f}, {before_s})")
    frame_energy = track.rms ** 2 * track.frame_len
    floor_energy = (track.noise_floor ** 2) * track.frame_len
    threshold = max(cfg.burst_rel_threshold * float(np.max(frame_energy)),
                    cfg.burst_floor_factor * floor_energy)
    ok = (rise > threshold) & (rise > 0) & (track.band_ratio >= cfg.burst_min_band_ratio)
    ok[:lo] = False
    ok[hi:] = False
    if not ok.any():
        raise NoBurstDetected(f"no broadband transient after {after_s:.4f} s")
    i = int(np.argmax(np.where(ok, rise, -np.inf)))

    a = max((i - 1) * track.hop, int(round(after_s * sr)))
    b = i * track.hop + track.frame_len
    if before_s is not None:
        b = min(b, int(round(before_s * sr)))
    seg = np.abs(track.samples[a:b])
    if seg.size == 0:
        return float(track.start_s(i))
    k = int(np.flatnonzero(seg >= 0.5 * seg.max())[0])
    return (a + k) / sr


@dataclass
class Analysis:
    """Outcome of :func:`analyze_clip`; ``annotation`` is None when unanalyzable."""

    id: str
    label: Label
    annotation: SegmentAnnotation | None
    unanalyzable_reason: str | None = None
    frication: tuple | None = None

    @property
    def ok(self) -> bool:
        return self.annotation is not None

    @property
    def vot_ms(self) -> float | None:
        return None if self.annotation is None else self.annotation.vot_ms


def analyze_clip(clip: WaveformClip, config: AnalyzerConfig | None = None) -> Analysis:
    """Label a clip #sTV or #TV and measure its VOT.

    Detector failures are returned as an unanalyzable :class:`Analysis`
    carrying the exception class name, never raised.
    """
    config = config or AnalyzerConfig()
    try:
        track = frame_features(clip.samples, clip.sample_rate, config)
        fric = detect_frication(track)
        label = Label.STV if fric is not None else Label.TV
        after = fric[1] if fric is not None else 0.0
        try:
            bound = detect_voicing_onset(track, after)
        except NoVoicingDetected:
            bound = None
        burst = detect_burst(track, after, bound)
        onset = detect_voicing_onset(track, burst)
        if onset <= burst:
            # the burst frame itself reads as periodic: take the next voiced run
            onset = detect_voicing_onset(track, burst + track.hop / track.sample_rate)
        ann = SegmentAnnotation(
            frication_end_s=0.0 if fric is None else min(fric[1], burst),
            burst_s=burst,
            voicing_onset_s=onset,
            frication_start_s=0.0 if fric is None else min(fric[0], burst),
        )
        return Analysis(clip.id, label, ann, None, fric)
    except SoundChainError as exc:
        return Analysis(clip.id, Label.UNKNOWN, None, type(exc).__name__)
