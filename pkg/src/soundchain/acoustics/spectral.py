"""Band-limited power spectra and their first four moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d, uniform_filter1d

from ..corpus.clip import SegmentAnnotation, WaveformClip
from ..errors import MomentsUndefined, TooShort
from .features import AnalyzerConfig

MIN_SPECTRUM_SAMPLES = 64


def power_spectrum(samples, sr, *, band=(750.0, 8000.0), smoothing_hz=100.0,
                   kernel="rectangular", nfft=None):
    """Hann-windowed |DFT|^2, smoothed along frequency and restricted to ``band``.

    Smoothing is applied to the full one-sided spectrum before the band is
    cut out, so bins near the band edges are averaged with real neighbours.
    The rectangular kernel spans ``smoothing_hz`` and is normalized; the
    Gaussian kernel has that FWHM. Returns ``(freqs, power)``.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < MIN_SPECTRUM_SAMPLES:
        raise TooShort(f"need at least {MIN_SPECTRUM_SAMPLES} samples")
    n = x.shape[0]
    if nfft is None:
        nfft = max(1024, 1 << int(np.ceil(np.log2(n))))
    power = np.abs(np.fft.rfft(x * np.hanning(n), n=nfft)) ** 2
    freqs = np.fft.rfftfreq(nfft, 1.0 / sr)
    df = freqs[1]
    if smoothing_hz and smoothing_hz > 0:
        if kernel == "rectangular":
            width = max(1, int(round(smoothing_hz / df)))
            power = uniform_filter1d(power, size=width, mode="reflect")
        elif kernel == "gaussian":
            sigma = smoothing_hz / df / (2.0 * np.sqrt(2.0 * np.log(2.0)))
            power = gaussian_filter1d(power, sigma, mode="reflect")
        else:
            raise ValueError(f"unknown smoothing kernel {kernel!r}")
    keep = (freqs >= band[0]) & (freqs <= band[1])
    return freqs[keep], np.maximum(power[keep], 0.0)


@dataclass(frozen=True)
class SpectralMoments:
    cog: float
    sd: float
    skew: float
    kurtosis: float


def spectral_moments(freqs, power) -> SpectralMoments:
    """Power-weighted mean, SD, skew and excess kurtosis of a spectrum.

    Kurtosis is reported as excess kurtosis (fourth standardized moment minus
    3), so a Gaussian-shaped spectrum scores 0.
    """
    f = np.asarray(freqs, dtype=np.float64)
    p = np.asarray(power, dtype=np.float64)
    total = p.sum()
    if not total > 0:
        raise ValueError("total power must be positive")
    w = p / total
    cog = float(np.dot(w, f))
    d = f - cog
    m2 = float(np.dot(w, d * d))
    sd = float(np.sqrt(m2))
    if sd == 0.0:
        raise MomentsUndefined("spectral SD is zero: skew and kurtosis undefined", cog=cog, sd=0.0)
    m3 = float(np.dot(w, d ** 3))
    m4 = float(np.dot(w, d ** 4))
    return SpectralMoments(cog, sd, m3 / sd ** 3, m4 / m2 ** 2 - 3.0)


@dataclass(frozen=True)
class TrajectoryPoint:
    decile: int
    center_s: float
    cog_hz: float
    sd_hz: float
    skew: float
    kurtosis: float
    clamped: bool = False


@dataclass
class SpectralTrajectory:
    id: str
    label: str
    vot_ms: float
    points: list

    def rows(self, generation=None):
        for p in self.points:
            yield {
                "id": self.id, "generation": generation, "label": self.label,
                "decile": p.decile, "cog_hz": p.cog_hz, "sd_hz": p.sd_hz, "skew": p.skew,
                "kurtosis": p.kurtosis, "duration_s": self.vot_ms / 1000.0,
            }


def spectral_trajectory(clip: WaveformClip, annotation: SegmentAnnotation, label=None,
                        config: AnalyzerConfig | None = None) -> SpectralTrajectory:
    """Moments of 10 ms Hann windows centred at 10%, 20%, ..., 100% of the VOT.

    Windows that would run past either clip edge are shifted inside it and
    flagged ``clamped``. A window whose moments are undefined (zero spread)
    gets NaN skew and kurtosis.
    """
    config = config or AnalyzerConfig()
    vot_s = annotation.voicing_onset_s - annotation.burst_s
    if not vot_s > 0:
        raise ValueError("annotation must have positive VOT")
    sr = clip.sample_rate
    x = np.asarray(clip.samples, dtype=np.float64)
    win = max(MIN_SPECTRUM_SAMPLES, int(round(config.moment_window_s * sr)))
    points = []
    for decile in range(1, 11):
        center = annotation.burst_s + decile / 10.0 * vot_s
        a = int(round(center * sr)) - win // 2
        clamped = False
        if a < 0:
            a, clamped = 0, True
        if a + win > x.shape[0]:
            a, clamped = x.shape[0] - win, True
        freqs, power = power_spectrum(x[a:a + win], sr,
                                      band=(config.band_lo_hz, config.band_hi_hz),
                                      smoothing_hz=config.smoothing_hz,
                                      kernel=config.smoothing_kernel)
        try:
            m = spectral_moments(freqs, power)
            vals = (m.cog, m.sd, m.skew, m.kurtosis)
        except MomentsUndefined as exc:
            vals = (exc.cog, 0.0, float("nan"), float("nan"))
        except ValueError:
            vals = (float("nan"),) * 4
        points.append(TrajectoryPoint(decile, center, *vals, clamped=clamped))
    if label is None:
        label = clip.label.value
    return SpectralTrajectory(clip.id, str(label), 1000.0 * vot_s, points)
