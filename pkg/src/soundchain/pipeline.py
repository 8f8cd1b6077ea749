"""Analysis of a whole lineage: the source corpus as Gen0 plus every generation's outputs."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .acoustics import (
    ANALYSIS_COLUMNS,
    TRAJECTORY_COLUMNS,
    AnalyzerConfig,
    analyze_clips,
    write_csv,
)
from .corpus import MODEL_LENGTH, load_corpus_dir
from .errors import AudioIoError
from .lineage import read_manifest

ANALYSIS_FILE = "analysis.csv"
VOT_FILE = "vot.csv"
TRAJECTORY_FILE = "trajectories.csv"
META_FILE = "analysis.json"


def _load_generation(path, length, what):
    path = Path(path)
    if not path.is_dir():
        raise AudioIoError(f"{what}: directory {path} does not exist")
    if not any(path.glob("*.wav")):
        raise AudioIoError(f"{what}: no WAV files in {path}")
    return load_corpus_dir(path, length=length)


def lineage_sources(lineage_dir, corpus_dir=None):
    """``[(generation label, clip directory)]`` for Gen0 and every finished generation."""
    lineage_dir = Path(lineage_dir)
    try:
        manifest = read_manifest(lineage_dir)
    except FileNotFoundError as exc:
        raise AudioIoError(f"no lineage manifest in {lineage_dir}") from exc
    corpus = corpus_dir or manifest["corpus"]["path"]
    if corpus is None:
        raise AudioIoError("lineage manifest records no corpus path; pass the corpus directory")
    sources = [("Gen0", Path(corpus))]
    for entry in manifest["generations"]:
        if entry.get("status") == "complete":
            sources.append((f"Gen{entry['gen_index']}", lineage_dir / entry["output_dir"]))
    length = manifest["lineage_config"]["gan"].get("output_len", MODEL_LENGTH)
    return manifest, sources, length


def analyze_lineage(lineage_dir, out_dir, *, config: AnalyzerConfig | None = None, cap_tv=None,
                    threads=1, corpus_dir=None, log=None) -> dict:
    """Annotate Gen0..GenK and write the analysis, VOT and trajectory CSVs.

    ``analysis.csv`` holds one row per clip, ``vot.csv`` the same rows after
    capping analyzable #TV clips at ``cap_tv`` per generation, and
    ``trajectories.csv`` ten spectral-moment rows per clip of ``vot.csv``.
    """
    config = config or AnalyzerConfig()
    manifest, sources, length = lineage_sources(lineage_dir, corpus_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    analysis, vot, traj = [], [], []
    counts = {}
    for label, path in sources:
        clips = _load_generation(path, length, label)
        ga = analyze_clips(clips, label, config, cap_tv=cap_tv, threads=threads)
        analysis += ga.analysis_rows()
        vot += ga.vot_rows()
        traj += ga.trajectory_rows()
        counts[label] = {"clips": len(clips), "vot_rows": len(ga.vot_results),
                         "analyzable": sum(r.ok for r in ga.results)}
        if log is not None:
            log(f"{label}: {len(clips)} clips, {counts[label]['analyzable']} analyzable")
    write_csv(out_dir / ANALYSIS_FILE, analysis, ANALYSIS_COLUMNS)
    write_csv(out_dir / VOT_FILE, vot, ANALYSIS_COLUMNS)
    write_csv(out_dir / TRAJECTORY_FILE, traj, TRAJECTORY_COLUMNS)
    meta = {"generations": [g for g, _ in sources], "counts": counts, "cap_tv": cap_tv,
            "analyzer": dataclasses.asdict(config),
            "lineage_chain_hash": manifest.get("chain_hash"),
            "run_config_hash": manifest.get("run_config_hash")}
    (out_dir / META_FILE).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta
