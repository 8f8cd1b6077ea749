"""Klatt-style additive synthesis of #TV and #sTV tokens.

Every clip is assembled from known segments, so its ground-truth annotation
is exact to the sample: the burst starts at ``burst_s`` and the first glottal
pulse of the vowel falls on ``voicing_onset_s``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, signal, stats

from ..errors import EmptyCorpus, InvalidCutoff, InvalidFormants
from .clip import MODEL_LENGTH, SAMPLE_RATE, Label, SegmentAnnotation, WaveformClip

# Peterson & Barney style adult male monophthongs: i, E, a, O, u
DEFAULT_VOWELS = (
    (270.0, 2290.0, 3010.0),
    (530.0, 1840.0, 2480.0),
    (730.0, 1090.0, 2440.0),
    (570.0, 840.0, 2410.0),
    (300.0, 870.0, 2240.0),
)

VOT_BOUNDS_MS = (5.0, 150.0)


@dataclass(frozen=True)
class CorpusSpec:
    n_tv: int = 902
    n_stv: int = 98
    tv_vot_mean_ms: float = 59.33
    tv_vot_sd_ms: float = 20.97
    stv_vot_mean_ms: float = 25.36
    stv_vot_sd_ms: float = 8.76
    vowel_set: tuple = DEFAULT_VOWELS
    f0_hz: float = 120.0
    seed: int = 0
    sample_rate: int = SAMPLE_RATE
    length: int = MODEL_LENGTH
    # segment durations (ms), drawn uniformly from each range
    lead_ms: tuple = (20.0, 50.0)
    frication_ms: tuple = (80.0, 150.0)
    closure_ms: tuple = (30.0, 60.0)
    vowel_ms: tuple = (150.0, 250.0)
    frication_cutoff_hz: float = 4000.0
    frication_rms: float = 0.12
    aspiration_rms: float = 0.05
    burst_peak: float = 0.5
    vowel_peak: float = 0.7
    dither: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "vowel_set", tuple(tuple(float(f) for f in v) for v in self.vowel_set))
        for name in ("lead_ms", "frication_ms", "closure_ms", "vowel_ms"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    def validate(self) -> None:
        if self.n_tv < 0 or self.n_stv < 0:
            raise EmptyCorpus("clip counts must be non-negative")
        if self.n_tv + self.n_stv == 0:
            raise EmptyCorpus("corpus needs at least one clip")
        for v in self.vowel_set:
            _check_formants(v)
        for sd in (self.tv_vot_sd_ms, self.stv_vot_sd_ms):
            if sd < 0:
                raise ValueError("VOT standard deviations must be non-negative")
        longest = (self.lead_ms[1] + self.frication_ms[1] + self.closure_ms[1]
                   + VOT_BOUNDS_MS[1] + self.vowel_ms[1])
        if longest / 1000.0 * self.sample_rate > self.length:
            raise ValueError("segment durations can exceed the clip length")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["vowel_set"] = [list(v) for v in self.vowel_set]
        for name in ("lead_ms", "frication_ms", "closure_ms", "vowel_ms"):
            d[name] = list(d[name])
        return d


def _check_formants(formants) -> None:
    f = list(formants)
    if len(f) == 0 or any(b <= a for a, b in zip(f, f[1:])) or f[0] <= 0:
        raise InvalidFormants(f"formants must be positive and strictly ascending: {f}")


def _rng(rng_state) -> np.random.Generator:
    if isinstance(rng_state, np.random.Generator):
        return rng_state
    return np.random.default_rng(rng_state)


def resonator(x: np.ndarray, freq: float, bw: float, sr: float) -> np.ndarray:
    """Second-order Klatt resonator with unity gain at DC."""
    t = 1.0 / sr
    c = -math.exp(-2.0 * math.pi * bw * t)
    b = 2.0 * math.exp(-math.pi * bw * t) * math.cos(2.0 * math.pi * freq * t)
    a = 1.0 - b - c
    return signal.lfilter([a], [1.0, -b, -c], x)


def synth_vowel(formants, f0, dur, sr=SAMPLE_RATE, *, declination=0.1,
                bandwidths=(80.0, 100.0, 150.0), peak=0.9,
                onset_ramp_s=0.004, offset_ramp_s=0.02):
    """Pulse-excited cascade formant vowel.

    The first glottal pulse sits on sample 0. F0 falls linearly by
    ``declination`` (a fraction) over the vowel. The result is scaled so its
    absolute peak equals ``peak`` (at most 0.9).
    """
    _check_formants(formants)
    if not 50.0 < f0 < 400.0:
        raise ValueError(f"f0 must lie in (50, 400) Hz, got {f0}")
    if dur < 0:
        raise ValueError("duration must be non-negative")
    n = int(round(dur * sr))
    if n == 0:
        return np.zeros(0)
    t = np.arange(n) / sr
    f0_track = f0 * (1.0 - declination * t / max(dur, 1e-12))
    phase = np.concatenate([[0.0], np.cumsum(f0_track[:-1] / sr)])
    pulses = np.zeros(n)
    pulses[0] = 1.0
    crossings = np.nonzero(np.floor(phase[1:]) > np.floor(phase[:-1]))[0] + 1
    pulses[crossings] = 1.0

    # glottal low-pass (resonator at 0 Hz) then lip radiation (differencing)
    src = resonator(pulses, 0.0, 100.0, sr)
    src = np.diff(src, prepend=0.0)
    y = src
    bws = list(bandwidths) + [bandwidths[-1]] * (len(formants) - len(bandwidths))
    for f, bw in zip(formants, bws):
        y = resonator(y, f, bw, sr)

    env = np.ones(n)
    k_on = min(n, int(round(onset_ramp_s * sr)))
    k_off = min(n - k_on, int(round(offset_ramp_s * sr)))
    if k_on:
        env[:k_on] = 0.5 - 0.5 * np.cos(np.pi * (np.arange(k_on) + 1) / (k_on + 1))
    if k_off:
        env[n - k_off:] *= 0.5 + 0.5 * np.cos(np.pi * (np.arange(k_off) + 1) / (k_off + 1))
    y = y * env
    m = np.max(np.abs(y))
    if m == 0:
        return y
    target = min(peak, 0.9)
    # the division can overshoot the target by one ulp
    return np.clip(y * (target / m), -target, target)


def synth_frication(dur, cutoff, sr=SAMPLE_RATE, rng=None, *, rms=0.12, ramp_s=0.01):
    """High-passed white noise standing in for [s]."""
    if not 0.0 < cutoff < sr / 2.0:
        raise InvalidCutoff(f"cutoff {cutoff} Hz must lie in (0, {sr / 2.0}) Hz")
    if dur <= 0:
        raise ValueError("duration must be positive")
    rng = _rng(rng)
    n = int(round(dur * sr))
    sos = signal.butter(6, cutoff, btype="highpass", fs=sr, output="sos")
    y = signal.sosfilt(sos, rng.standard_normal(n + 256))[256:]
    k = min(n // 2, int(round(ramp_s * sr)))
    if k:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(k) + 1) / (k + 1))
        y[:k] *= ramp
        y[n - k:] *= ramp[::-1]
    cur = np.sqrt(np.mean(y ** 2))
    return y * (rms / cur) if cur > 0 else y


def synth_aspiration(n, formants, sr=SAMPLE_RATE, rng=None, *, rms=0.05):
    """Glottal-frication noise: a flat component plus parallel resonators at
    the upper formants of the following vowel (F1 is damped by the open
    glottis)."""
    rng = _rng(rng)
    if n <= 0:
        return np.zeros(0)
    src = rng.standard_normal(n + 256)
    src = np.diff(src, prepend=0.0)
    y = 0.3 * src
    for f, bw in zip(list(formants[1:]) + [3500.0], (200.0, 300.0, 400.0)):
        y = y + resonator(src, f, bw, sr) * (bw / 100.0)
    y = y[256:]
    y = y - y.mean()
    cur = np.sqrt(np.mean(y ** 2))
    return y * (rms / cur) if cur > 0 else y


def synth_burst(sr=SAMPLE_RATE, rng=None, *, dur_s=0.002, peak=0.5):
    """A 2 ms decaying broadband transient."""
    rng = _rng(rng)
    n = max(1, int(round(dur_s * sr)))
    y = rng.standard_normal(n) * np.exp(-np.arange(n) / (0.35 * n))
    y[0] = abs(y[0]) + 1.0
    return y * (peak / np.max(np.abs(y)))


@functools.lru_cache(maxsize=64)
def truncated_location(mean, sd, lo, hi) -> float:
    """Location of a normal that, truncated to ``[lo, hi]``, has mean ``mean``."""
    if sd == 0 or not lo < mean < hi:
        return float(mean)

    def gap(mu):
        a, b = (lo - mu) / sd, (hi - mu) / sd
        return stats.truncnorm.mean(a, b, loc=mu, scale=sd) - mean

    span = 10.0 * sd + (hi - lo)
    return float(optimize.brentq(gap, mean - span, mean + span, xtol=1e-10))


def draw_vot_ms(rng, mean, sd, bounds=VOT_BOUNDS_MS) -> float:
    """Truncated normal draw whose truncated mean equals ``mean``.

    The location is shifted to cancel the bias truncation would add, then
    values outside ``bounds`` are re-drawn.
    """
    lo, hi = bounds
    if sd == 0:
        return float(np.clip(mean, lo, hi))
    mu = truncated_location(float(mean), float(sd), float(lo), float(hi))
    while True:
        v = rng.normal(mu, sd)
        if lo <= v <= hi:
            return float(v)


def make_clip(structure, spec: CorpusSpec, rng_state, clip_id="clip", vowel=None) -> WaveformClip:
    """Assemble one clip: [s] (STV only), closure, burst, aspiration, vowel, silence."""
    structure = Label(structure)
    if structure is Label.UNKNOWN:
        raise ValueError("structure must be TV or STV")
    rng = _rng(rng_state)
    sr = spec.sample_rate
    ms = lambda v: int(round(v * sr / 1000.0))  # noqa: E731

    if vowel is None:
        vowel = spec.vowel_set[int(rng.integers(len(spec.vowel_set)))]
    if structure is Label.STV:
        vot = draw_vot_ms(rng, spec.stv_vot_mean_ms, spec.stv_vot_sd_ms)
    else:
        vot = draw_vot_ms(rng, spec.tv_vot_mean_ms, spec.tv_vot_sd_ms)
    n_vot = max(1, ms(vot))
    lead = ms(rng.uniform(*spec.lead_ms))
    n_fric = ms(rng.uniform(*spec.frication_ms)) if structure is Label.STV else 0
    n_clos = ms(rng.uniform(*spec.closure_ms)) if structure is Label.STV else 0
    n_vowel = ms(rng.uniform(*spec.vowel_ms))

    fric_start = lead if n_fric else 0
    fric_end = lead + n_fric if n_fric else 0
    burst = lead + n_fric + n_clos
    onset = burst + n_vot
    end = onset + n_vowel

    y = np.zeros(spec.length)
    y[:end] += spec.dither * rng.standard_normal(end)
    if n_fric:
        y[fric_start:fric_end] += synth_frication(n_fric / sr, spec.frication_cutoff_hz, sr, rng,
                                                  rms=spec.frication_rms)
    asp = synth_aspiration(n_vot, vowel, sr, rng, rms=spec.aspiration_rms)
    fade = min(len(asp), ms(1.0))
    if fade:
        asp[-fade:] *= np.linspace(1.0, 0.0, fade + 2)[1:-1]
    y[burst:onset] += asp
    b = synth_burst(sr, rng, peak=spec.burst_peak)
    y[burst:burst + len(b)] += b
    y[onset:end] += synth_vowel(vowel, spec.f0_hz, n_vowel / sr, sr, peak=spec.vowel_peak)
    y = np.clip(y, -1.0, 1.0)

    truth = SegmentAnnotation(
        frication_end_s=fric_end / sr,
        burst_s=burst / sr,
        voicing_onset_s=onset / sr,
        frication_start_s=fric_start / sr,
    )
    clip = WaveformClip(y, id=clip_id, label=structure, truth=truth, sample_rate=sr,
                        meta={"vowel": list(vowel), "samples": {"frication_start": fric_start,
                              "frication_end": fric_end, "burst": burst, "voicing_onset": onset,
                              "vowel_end": end}})
    return clip


def manifest_row(clip: WaveformClip, path=None) -> dict:
    t = clip.truth
    return {
        "id": clip.id,
        "label": clip.label.value,
        "vot_ms": None if t is None else round(t.vot_ms, 6),
        "frication_end_s": None if t is None else t.frication_end_s,
        "burst_s": None if t is None else t.burst_s,
        "voicing_onset_s": None if t is None else t.voicing_onset_s,
        "path": None if path is None else str(path),
    }


def build_corpus(spec: CorpusSpec):
    """Synthesize ``n_tv`` #TV and ``n_stv`` #sTV clips.

    The structure order is shuffled with ``spec.seed`` and clips are named
    ``c00000, c00001, ...`` so that the id order interleaves the two
    structures. Each clip gets its own child seed, so clips can be built in
    any order. Vowels cycle through ``spec.vowel_set`` within each structure.

    Returns ``(clips, rows)``, both sorted by id.
    """
    spec.validate()
    n = spec.n_tv + spec.n_stv
    root = np.random.SeedSequence(spec.seed)
    order_rng = np.random.default_rng(root.spawn(1)[0])
    structures = np.array([Label.TV] * spec.n_tv + [Label.STV] * spec.n_stv, dtype=object)
    structures = structures[order_rng.permutation(n)]
    children = root.spawn(n)
    counters = {Label.TV: 0, Label.STV: 0}
    clips = []
    for i, (s, child) in enumerate(zip(structures, children)):
        vowel = spec.vowel_set[counters[s] % len(spec.vowel_set)]
        counters[s] += 1
        clips.append(make_clip(s, spec, np.random.default_rng(child), f"c{i:05d}", vowel))
    rows = [manifest_row(c) for c in clips]
    return clips, rows
