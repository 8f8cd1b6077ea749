import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soundchain.acoustics import (
    AnalyzerConfig,
    analyze_clip,
    analyze_clips,
    cap_tv_results,
    detect_burst,
    detect_frication,
    detect_voicing_onset,
    frame_features,
    power_spectrum,
    read_csv,
    spectral_moments,
    spectral_trajectory,
    write_csv,
    ANALYSIS_COLUMNS,
)
from soundchain.corpus import CorpusSpec, Label, WaveformClip, build_corpus, make_clip, synth_vowel
from soundchain.errors import MomentsUndefined, NoBurstDetected, NoVoicingDetected, TooShort

SR = 16000


@pytest.fixture(scope="module")
def small_corpus():
    clips, _ = build_corpus(CorpusSpec(n_tv=30, n_stv=20, seed=31))
    return clips


def _pure_vowel():
    x = np.zeros(16384)
    v = synth_vowel((700, 1200, 2500), 120, 0.2, SR)
    x[1600:1600 + len(v)] = 0.7 * v
    x += 1e-4 * np.random.default_rng(0).standard_normal(x.shape)
    return x


# ---- frame_features --------------------------------------------------------

def test_pulse_train_is_periodic():
    p = np.zeros(16384)
    p[::133] = 1.0
    tr = frame_features(p, SR)
    voiced = tr.rms > 0
    # the last frames see too few future periods to correlate with
    usable = tr.start_s(np.arange(tr.n_frames)) < (16384 - 4 * 214 - 80) / SR
    assert tr.periodicity[voiced & usable].min() > 0.8


def test_silence_track():
    tr = frame_features(np.zeros(4000), SR)
    assert np.all(tr.rms == 0) and np.all(tr.periodicity == 0)


def test_white_noise_band_ratio():
    x = np.random.default_rng(2).standard_normal(32000)
    tr = frame_features(x, SR)
    assert abs(tr.band_ratio.mean() - 0.5) < 0.03
    assert 0 <= tr.band_ratio.min() and tr.band_ratio.max() <= 1
    assert 0 <= tr.periodicity.min() and tr.periodicity.max() <= 1


def test_too_short():
    with pytest.raises(TooShort):
        frame_features(np.zeros(10), SR)


# ---- detectors -------------------------------------------------------------

def test_frication_overlaps_truth(small_corpus):
    for clip in small_corpus:
        span = detect_frication(frame_features(clip.samples, SR))
        if clip.label is Label.TV:
            assert span is None
            continue
        a, b = clip.truth.frication_start_s, clip.truth.frication_end_s
        inter = max(0.0, min(b, span[1]) - max(a, span[0]))
        union = max(b, span[1]) - min(a, span[0])
        assert inter / union >= 0.5


def test_frication_silence():
    assert detect_frication(frame_features(np.zeros(16384), SR)) is None


def test_pure_vowel_has_no_burst():
    with pytest.raises(NoBurstDetected):
        detect_burst(frame_features(_pure_vowel(), SR), 0.0)


def test_burst_near_clip_start():
    clip = make_clip("TV", CorpusSpec(lead_ms=(2.0, 2.0)), 3, "early")
    assert clip.truth.burst_s == pytest.approx(0.002)
    got = detect_burst(frame_features(clip.samples, SR), 0.0)
    assert abs(got - clip.truth.burst_s) <= 0.005


def test_noise_has_no_voicing():
    x = np.random.default_rng(4).uniform(-0.5, 0.5, 16384)
    with pytest.raises(NoVoicingDetected):
        detect_voicing_onset(frame_features(x, SR), 0.0)


def test_voicing_boundary_inclusive(small_corpus):
    tr = frame_features(small_corpus[0].samples, SR)
    onset = detect_voicing_onset(tr, 0.0)
    assert detect_voicing_onset(tr, onset) == onset


# ---- analyze_clip ----------------------------------------------------------

def test_analyze_matches_truth(small_corpus):
    for clip in small_corpus:
        res = analyze_clip(clip)
        assert res.ok and res.label is clip.label
        assert abs(res.vot_ms - clip.truth.vot_ms) <= 5.0
        a = res.annotation
        assert a.frication_end_s <= a.burst_s < a.voicing_onset_s


def test_silence_unanalyzable():
    res = analyze_clip(WaveformClip(np.zeros(16384), "z"))
    assert not res.ok and res.unanalyzable_reason == "NoBurstDetected"
    assert res.label is Label.UNKNOWN


def test_analysis_deterministic(small_corpus):
    assert analyze_clip(small_corpus[3]) == analyze_clip(small_corpus[3])


@pytest.mark.parametrize("c", [0.25, 0.5, 2.0, 0.3, 1.1])
def test_scale_invariance(small_corpus, c):
    for clip in small_corpus[:10]:
        base = analyze_clip(clip)
        scaled = analyze_clip(WaveformClip(clip.samples * c, clip.id, clip.label, clip.truth))
        assert scaled.label is base.label
        assert scaled.vot_ms == pytest.approx(base.vot_ms, abs=1e-9)
        t0 = spectral_trajectory(clip, base.annotation)
        t1 = spectral_trajectory(WaveformClip(clip.samples * c, clip.id), base.annotation)
        for p, q in zip(t0.points, t1.points):
            # clip samples are float32, so scaling by a non power of two rounds
            assert q.cog_hz == pytest.approx(p.cog_hz, rel=1e-5)
            assert q.sd_hz == pytest.approx(p.sd_hz, rel=1e-5)
            assert q.skew == pytest.approx(p.skew, rel=1e-4, abs=1e-5)
            assert q.kurtosis == pytest.approx(p.kurtosis, rel=1e-4, abs=1e-5)


# ---- power_spectrum / spectral_moments ------------------------------------

def test_sine_peak():
    t = np.arange(1024) / SR
    f, p = power_spectrum(np.sin(2 * np.pi * 2000 * t), SR)
    assert abs(f[np.argmax(p)] - 2000) <= SR / 1024
    assert f[0] >= 750 and f[-1] <= 8000


def test_power_scales_quadratically():
    x = np.random.default_rng(5).standard_normal(512)
    _, p1 = power_spectrum(x, SR)
    _, p3 = power_spectrum(3.0 * x, SR)
    np.testing.assert_allclose(p3, 9.0 * p1, rtol=1e-12)


def test_white_noise_flat():
    cvs = []
    for seed in range(5):
        x = np.random.default_rng(seed).standard_normal(16384)
        _, p = power_spectrum(x, SR)
        cvs.append(p.std() / p.mean())
    assert max(cvs) < 0.3


def test_spectrum_too_short():
    with pytest.raises(TooShort):
        power_spectrum(np.zeros(32), SR)


def test_two_bin_moments():
    m = spectral_moments([900.0, 1100.0], [1.0, 1.0])
    assert m.cog == 1000.0 and m.skew == 0.0 and m.kurtosis == -2.0


def test_uniform_band_moments():
    f = np.linspace(750, 8000, 7251)
    m = spectral_moments(f, np.ones_like(f))
    assert m.cog == pytest.approx(4375.0, rel=0.01)
    assert m.sd == pytest.approx(7250 / np.sqrt(12), rel=0.01)
    assert abs(m.skew) < 1e-10
    assert m.kurtosis == pytest.approx(-1.2, abs=0.012)


def test_single_bin_undefined():
    with pytest.raises(MomentsUndefined) as ei:
        spectral_moments([1000.0, 2000.0, 3000.0], [0.0, 5.0, 0.0])
    assert ei.value.cog == 2000.0 and ei.value.sd == 0.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 100.0), min_size=2, max_size=40), st.floats(1e-3, 1e3))
def test_moments_scale_free_and_symmetric(half, c):
    # mirror the weights about the centre so the spectrum is symmetric
    p = np.array(half + half[::-1])
    f = 1000.0 + 50.0 * np.arange(p.size)
    m = spectral_moments(f, p)
    assert abs(m.skew) < 1e-10
    assert m.cog == pytest.approx(f.mean(), rel=1e-12)
    m2 = spectral_moments(f, c * p)
    assert m2.sd == pytest.approx(m.sd, rel=1e-9)
    assert m2.kurtosis == pytest.approx(m.kurtosis, rel=1e-9, abs=1e-9)


# ---- trajectories and batch output ----------------------------------------

def test_trajectory_deciles(small_corpus):
    clip = small_corpus[0]
    res = analyze_clip(clip)
    traj = spectral_trajectory(clip, res.annotation)
    assert len(traj.points) == 10
    vot_s = res.annotation.voicing_onset_s - res.annotation.burst_s
    for p in traj.points:
        assert p.center_s == pytest.approx(res.annotation.burst_s + p.decile * vot_s / 10)
        assert 750 <= p.cog_hz <= 8000 and p.sd_hz >= 0


def test_trajectory_centres_for_40ms():
    from soundchain.corpus import SegmentAnnotation
    clip = make_clip("TV", CorpusSpec(), 1, "x")
    ann = SegmentAnnotation(0.0, 0.1, 0.14)
    traj = spectral_trajectory(clip, ann)
    offsets = [round(1000 * (p.center_s - 0.1), 9) for p in traj.points]
    assert offsets == pytest.approx([4, 8, 12, 16, 20, 24, 28, 32, 36, 40])


def test_trajectory_clamped_at_edge():
    from soundchain.corpus import SegmentAnnotation
    clip = make_clip("TV", CorpusSpec(), 1, "x")
    end = clip.duration_s
    traj = spectral_trajectory(clip, SegmentAnnotation(0.0, end - 0.02, end))
    assert traj.points[-1].clamped and not traj.points[0].clamped


def test_batch_rows_and_cap(small_corpus, tmp_path):
    ga = analyze_clips(small_corpus, "Gen0", cap_tv=5)
    assert len(ga.results) == len(small_corpus)
    assert sum(r.label is Label.TV for r in ga.vot_results) == 5
    assert sum(r.label is Label.STV for r in ga.vot_results) == 20
    assert len(ga.trajectory_rows()) == 10 * len(ga.trajectories) == 10 * 25
    write_csv(tmp_path / "a.csv", ga.analysis_rows(), ANALYSIS_COLUMNS)
    rows = read_csv(tmp_path / "a.csv")
    assert list(rows[0]) == ANALYSIS_COLUMNS and len(rows) == 50


def test_threads_do_not_change_results(small_corpus):
    a = analyze_clips(small_corpus[:12], "Gen1", threads=1)
    b = analyze_clips(small_corpus[:12], "Gen1", threads=4)
    assert a.analysis_rows() == b.analysis_rows()
    assert a.trajectory_rows() == b.trajectory_rows()


def test_cap_none_keeps_everything(small_corpus):
    res = [analyze_clip(c) for c in small_corpus[:6]]
    assert cap_tv_results(res, None) == res


def test_config_rejects_bad_kernel():
    with pytest.raises(ValueError):
        AnalyzerConfig(smoothing_kernel="triangle").validate()
