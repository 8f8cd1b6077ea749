"""Corpus-level analysis and the CSV files it produces."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..corpus.clip import Label
from .annotate import Analysis, analyze_clip
from .features import AnalyzerConfig
from .spectral import SpectralTrajectory, spectral_trajectory

ANALYSIS_COLUMNS = ["id", "generation", "label", "vot_ms", "frication_end_ms", "burst_ms",
                    "voicing_onset_ms", "unanalyzable_reason"]
TRAJECTORY_COLUMNS = ["id", "generation", "label", "decile", "cog_hz", "sd_hz", "skew", "kurtosis",
                      "duration_s"]


def analysis_row(result: Analysis, generation: str) -> dict:
    ann = result.annotation
    if ann is None:
        return {"id": result.id, "generation": generation, "label": result.label.value,
                "vot_ms": "", "frication_end_ms": "", "burst_ms": "", "voicing_onset_ms": "",
                "unanalyzable_reason": result.unanalyzable_reason or ""}
    return {
        "id": result.id, "generation": generation, "label": result.label.value,
        "vot_ms": round(ann.vot_ms, 4),
        "frication_end_ms": round(1000.0 * ann.frication_end_s, 4),
        "burst_ms": round(1000.0 * ann.burst_s, 4),
        "voicing_onset_ms": round(1000.0 * ann.voicing_onset_s, 4),
        "unanalyzable_reason": "",
    }


def cap_tv_results(results, cap_tv: int | None):
    """Keep every #sTV result and only the first ``cap_tv`` analyzable #TV ones (id order)."""
    if cap_tv is None:
        return list(results)
    kept, n_tv = [], 0
    for r in sorted(results, key=lambda r: r.id):
        if r.label is Label.TV and r.ok:
            if n_tv >= cap_tv:
                continue
            n_tv += 1
        kept.append(r)
    return kept


@dataclass
class GenerationAnalysis:
    generation: str
    results: list
    vot_results: list
    trajectories: list = field(default_factory=list)

    def analysis_rows(self):
        return [analysis_row(r, self.generation) for r in self.results]

    def vot_rows(self):
        return [analysis_row(r, self.generation) for r in self.vot_results]

    def trajectory_rows(self):
        rows = []
        for t in self.trajectories:
            rows.extend(t.rows(self.generation))
        return rows


def analyze_clips(clips, generation: str, config: AnalyzerConfig | None = None, *,
                  cap_tv: int | None = None, threads: int = 1) -> GenerationAnalysis:
    """Annotate every clip, then measure spectral trajectories of the VOT table.

    ``results`` covers all clips (the basis for #sTV proportions);
    ``vot_results`` is the same list with #TV capped at ``cap_tv`` and is
    what the VOT statistics and trajectories are computed from. Output order
    is by clip id regardless of ``threads``.
    """
    config = config or AnalyzerConfig()
    clips = sorted(clips, key=lambda c: c.id)

    def work(clip):
        return analyze_clip(clip, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, clips))
    else:
        results = [work(c) for c in clips]

    vot_results = cap_tv_results(results, cap_tv)
    by_id = {c.id: c for c in clips}
    trajectories: list[SpectralTrajectory] = []
    for r in vot_results:
        if r.ok:
            trajectories.append(spectral_trajectory(by_id[r.id], r.annotation, r.label.value, config))
    return GenerationAnalysis(generation, results, vot_results, trajectories)


def write_csv(path, rows, columns):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in columns})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if v != v else repr(round(v, 6))
    return v


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
