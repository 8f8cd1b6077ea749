"""Corpus directories: ``<id>.wav`` files plus a ``manifest.jsonl``."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import AudioIoError
from .clip import MODEL_LENGTH, SAMPLE_RATE, Label, SegmentAnnotation, WaveformClip, fit_length
from .synth import manifest_row
from .wavio import ingest_wav_dir, read_wav, write_wav

MANIFEST_NAME = "manifest.jsonl"


def write_corpus_dir(clips, out_dir, manifest_name=MANIFEST_NAME):
    """Write clips as WAV files and one JSON object per line to the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for clip in sorted(clips, key=lambda c: c.id):
        path = out_dir / f"{clip.id}.wav"
        write_wav(path, clip.samples, clip.sample_rate)
        rows.append(manifest_row(clip, path.name))
    with open(out_dir / manifest_name, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return rows


def read_manifest(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def load_corpus_dir(path, expected_sr=SAMPLE_RATE, length=MODEL_LENGTH):
    """Load a corpus directory.

    With a manifest, labels and ground truth are restored from it; without
    one every ``*.wav`` is ingested as an unlabeled clip.
    """
    path = Path(path)
    manifest = path / MANIFEST_NAME
    if not manifest.exists():
        clips, _ = ingest_wav_dir(path, expected_sr, length)
        return clips
    clips = []
    for row in read_manifest(manifest):
        wav = path / (row.get("path") or f"{row['id']}.wav")
        if not wav.exists():
            raise AudioIoError(f"manifest entry {row['id']} has no file {wav}")
        samples, _ = fit_length(read_wav(wav, expected_sr), length)
        truth = None
        if row.get("burst_s") is not None:
            truth = SegmentAnnotation(
                frication_end_s=float(row.get("frication_end_s") or 0.0),
                burst_s=float(row["burst_s"]),
                voicing_onset_s=float(row["voicing_onset_s"]),
            )
        clips.append(WaveformClip(samples, id=row["id"], label=Label(row.get("label", "UNKNOWN")),
                                  truth=truth, sample_rate=expected_sr, meta={"path": str(wav)}))
    return sorted(clips, key=lambda c: c.id)
