from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import TooShort


@dataclass(frozen=True)
class AnalyzerConfig:
    frame_len_s: float = 0.005
    hop_s: float = 0.0025
    high_band_hz: float = 4000.0
    f0_min_hz: float = 75.0
    f0_max_hz: float = 300.0
    periodicity_periods: int = 4
    # frication
    fric_band_ratio: float = 0.6
    fric_floor_factor: float = 3.0
    fric_max_periodicity: float = 0.3
    fric_min_s: float = 0.040
    fric_max_gap_s: float = 0.005
    # voicing
    voicing_periodicity: float = 0.5
    voicing_run: int = 3
    # burst: rise must exceed this fraction of the clip's largest frame energy
    burst_rel_threshold: float = 0.05
    burst_floor_factor: float = 10.0
    burst_min_band_ratio: float = 0.05
    # spectra
    band_lo_hz: float = 750.0
    band_hi_hz: float = 8000.0
    smoothing_hz: float = 100.0
    smoothing_kernel: str = "rectangular"
    moment_window_s: float = 0.010

    def validate(self) -> None:
        if self.frame_len_s <= 0 or self.hop_s <= 0:
            raise ValueError("frame length and hop must be positive")
        if self.smoothing_kernel not in ("rectangular", "gaussian"):
            raise ValueError(f"unknown smoothing kernel {self.smoothing_kernel!r}")
        if self.periodicity_periods < 1:
            raise ValueError("periodicity_periods must be >= 1")
        if self.voicing_run < 1:
            raise ValueError("voicing_run must be >= 1")


@dataclass
class FrameTrack:
    """Per-frame measurements; frame ``i`` covers samples ``[i*hop, i*hop + frame_len)``."""

    sample_rate: int
    frame_len: int
    hop: int
    rms: np.ndarray
    zcr: np.ndarray
    band_ratio: np.ndarray
    high_energy: np.ndarray
    periodicity: np.ndarray
    samples: np.ndarray
    config: AnalyzerConfig

    @property
    def n_frames(self) -> int:
        return int(self.rms.shape[0])

    def start_s(self, i) -> np.ndarray | float:
        return np.asarray(i) * self.hop / self.sample_rate

    def center_s(self, i) -> np.ndarray | float:
        return (np.asarray(i) * self.hop + self.frame_len / 2.0) / self.sample_rate

    @property
    def noise_floor(self) -> float:
        """10th percentile of non-zero frame RMS."""
        nz = self.rms[self.rms > 0]
        if nz.size == 0:
            return 0.0
        return float(np.percentile(nz, 10))


def _periodicity(x: np.ndarray, starts: np.ndarray, win: int, lags: np.ndarray, periods: int) -> np.ndarray:
    """Pitch-synchronous normalized correlation per frame.

    For each candidate period ``T`` the frame ``x[s:s+win]`` is correlated
    (normalized) with its copies delayed by ``T, 2T, ..., periods*T``; the
    mean over those delays is maximized over ``T``. Averaging over several
    periods keeps the frame short while suppressing chance correlations in
    noise.
    """
    need = int(starts[-1]) + periods * int(lags[-1]) + win
    xp = np.zeros(max(need, x.shape[0]))
    xp[: x.shape[0]] = x
    segs = sliding_window_view(xp, win)
    csum = np.concatenate([[0.0], np.cumsum(xp * xp)])
    energy = csum[win:] - csum[:-win]
    scale = max(float(np.max(energy)), 1e-300)

    out = np.zeros(starts.shape[0])
    active = energy[starts] > 1e-12 * scale
    if not active.any():
        return out
    starts = starts[active]
    ref = segs[starts]
    e0 = energy[starts]
    acc = np.zeros((starts.shape[0], lags.shape[0]))
    for k in range(1, periods + 1):
        idx = starts[:, None] + k * lags[None, :]
        num = np.matmul(segs[idx], ref[:, :, None])[:, :, 0]
        den = np.sqrt(e0[:, None] * energy[idx])
        r = np.zeros_like(num)
        np.divide(num, den, out=r, where=den > 1e-12 * scale)
        acc += r
    out[active] = np.clip(acc.max(axis=1) / periods, 0.0, 1.0)
    return out


def frame_features(samples, sample_rate: int = 16000, config: AnalyzerConfig | None = None) -> FrameTrack:
    """RMS, zero-crossing rate, >4 kHz energy share and periodicity per frame.

    Spectral measures use Hann-windowed frames. Periodicity is the largest
    normalized correlation between the frame and copies of it delayed by
    whole multiples of a lag in the 75-300 Hz pitch-period range (see
    :func:`_periodicity`); silent frames get 0.
    """
    config = config or AnalyzerConfig()
    config.validate()
    x = np.asarray(samples, dtype=np.float64)
    frame = int(round(config.frame_len_s * sample_rate))
    hop = int(round(config.hop_s * sample_rate))
    if x.ndim != 1 or x.shape[0] < frame:
        raise TooShort(f"need at least {frame} samples, got {x.shape}")
    n_frames = 1 + (x.shape[0] - frame) // hop
    starts = np.arange(n_frames) * hop
    frames = sliding_window_view(x, frame)[starts]

    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    signs = np.signbit(frames)
    zcr = np.mean(signs[:, 1:] != signs[:, :-1], axis=1)

    nfft = max(128, 1 << int(np.ceil(np.log2(frame))))
    spec = np.abs(np.fft.rfft(frames * np.hanning(frame), n=nfft, axis=1)) ** 2
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    total = spec.sum(axis=1)
    high = spec[:, freqs > config.high_band_hz].sum(axis=1)
    band_ratio = np.zeros(n_frames)
    np.divide(high, total, out=band_ratio, where=total > 0)

    lag_lo = int(np.floor(sample_rate / config.f0_max_hz))
    lag_hi = int(np.ceil(sample_rate / config.f0_min_hz))
    periodicity = _periodicity(x, starts, frame, np.arange(lag_lo, lag_hi + 1),
                               config.periodicity_periods)

    return FrameTrack(sample_rate, frame, hop, rms, zcr, np.clip(band_ratio, 0.0, 1.0), high,
                      periodicity, x, config)
