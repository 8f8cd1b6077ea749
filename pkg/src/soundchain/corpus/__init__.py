"""Synthetic #TV / #sTV corpus and WAV input/output."""

from .clip import MODEL_LENGTH, SAMPLE_RATE, Label, SegmentAnnotation, WaveformClip, fit_length
from .synth import (
    CorpusSpec,
    build_corpus,
    make_clip,
    manifest_row,
    synth_aspiration,
    synth_burst,
    synth_frication,
    synth_vowel,
)
from .wavio import ingest_wav_dir, read_wav, write_wav
from .store import load_corpus_dir, write_corpus_dir

__all__ = [
    "MODEL_LENGTH", "SAMPLE_RATE", "Label", "SegmentAnnotation", "WaveformClip", "fit_length",
    "CorpusSpec", "build_corpus", "make_clip", "manifest_row", "synth_aspiration", "synth_burst",
    "synth_frication", "synth_vowel", "ingest_wav_dir", "read_wav", "write_wav",
    "load_corpus_dir", "write_corpus_dir",
]
