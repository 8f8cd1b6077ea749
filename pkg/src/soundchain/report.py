"""Markdown report with native SVG plots and every coefficient table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acoustics import read_csv, write_csv
from .errors import AudioIoError, EmptyData, SoundChainError
from .pipeline import ANALYSIS_FILE, TRAJECTORY_FILE, VOT_FILE
from .stats import (
    GRID_COLUMNS,
    SUMMARY_COLUMNS,
    Factor,
    GlmSpec,
    binned_interaction_summary,
    build_design,
    irls_fit,
    kde,
    natural_key,
    pairwise_contrasts,
    summary_table,
)
from .svg import Chart, Series, render

STRUCT = {"TV": "#TV", "STV": "#sTV"}
CONTRAST_COLUMNS = ["structure", "contrast", "estimate", "se", "ratio", "ratio_se", "z", "p", "p_adjusted"]
COEF_COLUMNS = ["term", "estimate", "se", "statistic", "p"]


@dataclass
class ReportOptions:
    kde_points: int = 512
    duration_bins: int = 5
    contrast_adjust: str = "bonferroni"


@dataclass
class ReportResult:
    path: Path
    generations: list
    files: list = field(default_factory=list)
    drift: dict | None = None
    notes: list = field(default_factory=list)


def _num(v):
    if v is None or v == "":
        return None
    x = float(v)
    return None if math.isnan(x) else x


def _read(path, required=True):
    if not path.exists():
        if required:
            raise AudioIoError(f"missing input {path}")
        return None
    return read_csv(path)


def _fmt(v, digits=2):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return f"{v:.{digits}f}"
    return str(v)


def _md_table(head, rows):
    out = ["| " + " | ".join(head) + " |", "|" + "|".join("---" for _ in head) + "|"]
    out += ["| " + " | ".join(str(c) for c in r) + " |" for r in rows]
    return "\n".join(out)


def _summary(rows, notes, what):
    try:
        return summary_table(rows)
    except EmptyData as exc:
        notes.append(f"no {what}: {exc}")
        return []


def _reference(gens):
    return "Gen1" if "Gen1" in gens else gens[0]


def _factors(gens, structure_ref, structure_first):
    f_gen = Factor("generation", _reference(gens))
    f_str = Factor("structure", structure_ref)
    if len(gens) < 2:
        return (f_str,)
    return (f_str, f_gen) if structure_first else (f_gen, f_str)


def _fit(rows, spec, notes, what):
    try:
        return irls_fit(build_design(rows, spec))
    except (SoundChainError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        notes.append(f"{what} not fitted: {type(exc).__name__}: {exc}")
        return None


def _coef_rows(fit):
    return [{"term": r["term"], "estimate": r["estimate"], "se": r["se"], "statistic": r[fit.stat_name],
             "p": r["p"]} for r in fit.table()]


def _coef_md(fit):
    rows = [[r["term"], f"{r['estimate']:.4f}", f"{r['se']:.4f}", f"{r['statistic']:.3f}", f"{r['p']:.4f}"]
            for r in _coef_rows(fit)]
    return _md_table(["term", "estimate", "SE", fit.stat_name, "p"], rows)


def _drift(vot_summary, gens):
    means = {(r.generation, r.structure): r.mean_vot_ms for r in vot_summary}
    stv = [(g, means.get((g, "STV"))) for g in gens]
    tv = [(g, means.get((g, "TV"))) for g in gens]
    stv_vals = [v for _, v in stv if v is not None]
    tv_vals = [v for _, v in tv if v is not None]
    rising = len(stv_vals) > 1 and all(b > a for a, b in zip(stv_vals, stv_vals[1:]))
    net_rise = len(stv_vals) > 1 and stv_vals[-1] > stv_vals[0]
    tv_spread = (max(tv_vals) - min(tv_vals)) / np.mean(tv_vals) if len(tv_vals) > 1 else float("nan")
    tv_flat = bool(tv_spread <= 0.10)
    return {"stv_means": stv, "tv_means": tv, "stv_monotonic": rising, "stv_net_rise": net_rise,
            "tv_relative_spread": float(tv_spread), "tv_flat": tv_flat,
            "consistent": bool(net_rise and tv_flat)}


def build_report(analysis_dir, out_dir, options: ReportOptions | None = None) -> ReportResult:
    """Read the analysis CSVs and write ``report.md``, SVG plots and CSV tables.

    Inputs are only read, never modified. Models that cannot be fitted on
    the data at hand (for example a generation without #sTV clips) are
    listed in the report instead of failing the whole run.
    """
    options = options or ReportOptions()
    analysis_dir, out_dir = Path(analysis_dir), Path(out_dir)
    analysis = _read(analysis_dir / ANALYSIS_FILE)
    vot = _read(analysis_dir / VOT_FILE, required=False) or analysis
    traj = _read(analysis_dir / TRAJECTORY_FILE, required=False) or []
    if not analysis:
        raise AudioIoError(f"{analysis_dir / ANALYSIS_FILE} has no rows")
    out_dir.mkdir(parents=True, exist_ok=True)
    gens = sorted({r["generation"] for r in analysis}, key=natural_key)
    notes = []
    files = []

    def save(name, text):
        (out_dir / name).write_text(text)
        files.append(name)

    # ---- descriptive tables
    count_summary = {(r.generation, r.structure): r for r in _summary(analysis, notes, "classified clips")}
    vot_summary = _summary(vot, notes, "VOT rows")
    vot_by = {(r.generation, r.structure): r for r in vot_summary}
    summary_rows = []
    for g in gens:
        for s in ("TV", "STV"):
            c, v = count_summary.get((g, s)), vot_by.get((g, s))
            if c is None:
                continue
            summary_rows.append({"generation": g, "structure": s, "n": c.n, "n_vot": v.n_vot if v else 0,
                                 "mean_vot_ms": v.mean_vot_ms if v else None,
                                 "sd_vot_ms": v.sd_vot_ms if v else None, "proportion_stv": c.proportion_stv})
    write_csv(out_dir / "summary.csv", summary_rows, SUMMARY_COLUMNS)
    files.append("summary.csv")
    unanalyzable = {g: sum(1 for r in analysis if r["generation"] == g and r["unanalyzable_reason"]) for g in gens}

    # ---- count model
    count_rows = []
    for g in gens:
        for s in ("TV", "STV"):
            c = count_summary.get((g, s))
            count_rows.append({"generation": g, "structure": STRUCT[s], "count": c.n if c else 0})
    count_fit = _fit(count_rows, GlmSpec("negbin_log", "count", _factors(gens, "#TV", False)), notes,
                     "count model") if any(r["count"] for r in count_rows) else None
    if count_fit is not None:
        write_csv(out_dir / "count_model.csv", _coef_rows(count_fit), COEF_COLUMNS)
        files.append("count_model.csv")
        if count_fit.fallback:
            notes.append(f"count model: {count_fit.fallback}")

    # ---- gamma model on VOT in seconds
    gamma_rows = []
    for r in vot:
        v = _num(r["vot_ms"])
        if r["label"] in STRUCT and v is not None and v > 0:
            gamma_rows.append({"generation": r["generation"], "structure": STRUCT[r["label"]], "vot_s": v / 1000.0})
    gamma_fit = _fit(gamma_rows, GlmSpec("gamma_log", "vot_s", _factors(gens, "#sTV", True)), notes,
                     "gamma model") if gamma_rows else None
    contrasts = []
    if gamma_fit is not None:
        write_csv(out_dir / "gamma_model.csv", _coef_rows(gamma_fit), COEF_COLUMNS)
        files.append("gamma_model.csv")
        if len(gens) > 1:
            for s in ("#TV", "#sTV"):
                for c in pairwise_contrasts(gamma_fit, "generation", s, adjust=options.contrast_adjust):
                    contrasts.append({"structure": s, "contrast": c.label, "estimate": c.estimate, "se": c.se,
                                      "ratio": c.ratio, "ratio_se": c.ratio_se, "z": c.z, "p": c.p,
                                      "p_adjusted": c.p_adjusted})
            write_csv(out_dir / "contrasts.csv", contrasts, CONTRAST_COLUMNS)
            files.append("contrasts.csv")

    # ---- proportion model (logistic, one proportion per generation)
    prop_rows = []
    for g in gens:
        n = sum(count_summary[g, s].n for s in ("TV", "STV") if (g, s) in count_summary)
        n_stv = count_summary[g, "STV"].n if (g, "STV") in count_summary else 0
        prop_rows.append({"generation": g, "p": n_stv / n if n else None, "n": n})
    prop_ci = {}
    fittable = [r for r in prop_rows if r["n"]]
    if len(fittable) > 1:
        pfit = _fit(fittable, GlmSpec("binomial_logit", "p", (Factor("generation", _reference(gens)),),
                                       weights="n"), notes, "proportion model")
        if pfit is not None:
            for g in (r["generation"] for r in fittable):
                x = pfit.design.column_vector({"generation": g})
                eta, se = float(x @ pfit.coef), float(math.sqrt(x @ pfit.cov @ x))
                prop_ci[g] = tuple(1 / (1 + math.exp(-(eta + k * 1.96 * se))) for k in (-1, 0, 1))

    # ---- densities
    dens_rows = []
    curves = {"TV": [], "STV": []}
    for s in ("TV", "STV"):
        for g in gens:
            vals = [_num(r["vot_ms"]) for r in vot if r["generation"] == g and r["label"] == s]
            vals = [v for v in vals if v is not None]
            try:
                c = kde(vals, n_grid=options.kde_points)
            except SoundChainError as exc:
                notes.append(f"no {STRUCT[s]} density for {g}: {exc}")
                continue
            curves[s].append((g, c))
            dens_rows += [{"generation": g, "structure": s, "vot_ms": x, "density": d}
                          for x, d in zip(c.grid.tolist(), c.density.tolist())]
    write_csv(out_dir / "densities.csv", dens_rows, ["generation", "structure", "vot_ms", "density"])
    files.append("densities.csv")
    gen0_stv = [_num(r["vot_ms"]) for r in vot if r["generation"] == gens[0] and r["label"] == "STV"]
    gen0_stv = [v for v in gen0_stv if v is not None]
    for s, name in (("STV", "vot_density_stv.svg"), ("TV", "vot_density_tv.svg")):
        vlines = [(max(gen0_stv), f"max {gens[0]} #sTV VOT {max(gen0_stv):.1f} ms", "#d62728")] if gen0_stv else []
        chart = Chart(f"{STRUCT[s]} VOT density by generation", "VOT (ms)", "density",
                      [Series(g, c.grid.tolist(), c.density.tolist()) for g, c in curves[s]], vlines, y_min=0.0)
        save(name, render(chart))

    # ---- proportion and mean plots
    xs = list(range(len(gens)))
    ticks = list(zip(xs, gens))
    series = [Series("observed", xs, [None if p["p"] is None else p["p"] * 100 for p in prop_rows], markers=True)]
    if prop_ci:
        series.append(Series("95% CI low", xs, [prop_ci[g][0] * 100 if g in prop_ci else None for g in gens], color="#7f7f7f", dashed=True))
        series.append(Series("95% CI high", xs, [prop_ci[g][2] * 100 if g in prop_ci else None for g in gens], color="#7f7f7f", dashed=True))
    save("proportion_stv.svg", render(Chart("#sTV share of classified outputs", "generation", "#sTV (%)",
                                            series, x_ticks=ticks, y_min=0.0)))
    series = []
    for s in ("TV", "STV"):
        series.append(Series(STRUCT[s], xs, [vot_by[g, s].mean_vot_ms if (g, s) in vot_by else None for g in gens],
                             markers=True))
    save("mean_vot.svg", render(Chart("Mean VOT by generation", "generation", "VOT (ms)", series,
                                      x_ticks=ticks, y_min=0.0)))

    # ---- spectral grid
    grid = []
    if traj:
        try:
            grid = binned_interaction_summary(traj, options.duration_bins, label="STV")
        except SoundChainError as exc:
            notes.append(f"spectral grid not built: {exc}")
        if grid:
            write_csv(out_dir / "spectral_grid.csv", [c.as_dict() for c in grid], GRID_COLUMNS)
            files.append("spectral_grid.csv")

    # ---- markdown
    md = ["# VOT drift report", ""]
    md.append(f"Generations analyzed: {', '.join(gens)}. {gens[0]} is the source corpus; it goes through the "
              "same automatic annotator as the generated outputs (no hand annotation anywhere).")
    md += ["", "## Counts and #sTV proportion", ""]
    md.append(_md_table(["generation", "all", "#sTV", "#TV", "% #sTV", "unanalyzable", "#TV with VOT"],
                        [[g, sum(count_summary[g, s].n for s in ("TV", "STV") if (g, s) in count_summary),
                          count_summary[g, "STV"].n if (g, "STV") in count_summary else 0,
                          count_summary[g, "TV"].n if (g, "TV") in count_summary else 0,
                          "" if prop_rows[i]["p"] is None else f"{100 * prop_rows[i]['p']:.2f}%", unanalyzable[g],
                          vot_by[g, "TV"].n_vot if (g, "TV") in vot_by else 0]
                         for i, g in enumerate(gens)]))
    md += ["", "![#sTV proportion](proportion_stv.svg)", "", "## VOT means (ms)", ""]
    md.append(_md_table(["generation", "#TV mean", "#TV SD", "#sTV mean", "#sTV SD"],
                        [[g] + [_fmt(getattr(vot_by.get((g, s)), k, None)) for s in ("TV", "STV")
                                for k in ("mean_vot_ms", "sd_vot_ms")] for g in gens]))
    md += ["", "![mean VOT](mean_vot.svg)", "", "## VOT densities", "",
           "The dashed line marks the longest #sTV VOT in the source corpus.", "",
           "![#sTV densities](vot_density_stv.svg)", "", "![#TV densities](vot_density_tv.svg)", ""]
    md += ["## Count model (#TV/#sTV counts per generation)", ""]
    md.append(_coef_md(count_fit) if count_fit is not None else "_not fitted_")
    md += ["", "## Gamma model (log link, VOT in seconds)", ""]
    md.append(_coef_md(gamma_fit) if gamma_fit is not None else "_not fitted_")
    if contrasts:
        md += ["", f"## Pairwise generation contrasts (p adjustment: {options.contrast_adjust})", ""]
        md.append(_md_table(["structure", "contrast", "ratio", "SE", "z", "p", "p adj."],
                            [[c["structure"], c["contrast"], f"{c['ratio']:.4f}", f"{c['ratio_se']:.4f}",
                              f"{c['z']:.3f}", f"{c['p']:.4f}", f"{c['p_adjusted']:.4f}"] for c in contrasts]))
    if grid:
        md += ["", "## #sTV spectral moments by VOT duration bin (10% and 50% of VOT)", ""]
        by = {(c.bin_index, c.generation, c.decile): c for c in grid}
        bins = sorted({(c.bin_index, c.bin_lo, c.bin_hi) for c in grid})
        grows = []
        for b, lo, hi in bins:
            for g in sorted({c.generation for c in grid}, key=natural_key):
                c1, c5 = by.get((b, g, 1)), by.get((b, g, 5))
                grows.append([f"{1000 * lo:.1f}-{1000 * hi:.1f}", g, c1.n if c1 else 0,
                              _fmt(c1.cog_hz if c1 else None, 0), _fmt(c5.cog_hz if c5 else None, 0),
                              _fmt(c1.skew if c1 else None), _fmt(c5.skew if c5 else None)])
        md.append(_md_table(["VOT bin (ms)", "generation", "n", "COG 10%", "COG 50%", "skew 10%", "skew 50%"],
                            grows))
        md += ["", "Empty cells are left blank, not interpolated."]
    drift = None
    if len(gens) > 1:
        drift = _drift(vot_summary, gens)
        md += ["", "## drift", ""]
        md.append("#sTV mean VOT in generation order: "
                  + ", ".join(f"{g} {_fmt(v)} ms" for g, v in drift["stv_means"]) + ".")
        md.append("")
        md.append("#TV mean VOT in generation order: "
                  + ", ".join(f"{g} {_fmt(v)} ms" for g, v in drift["tv_means"]) + ".")
        md.append("")
        md.append(f"#sTV rises monotonically: {'yes' if drift['stv_monotonic'] else 'no'}; "
                  f"net rise from first to last generation: {'yes' if drift['stv_net_rise'] else 'no'}; "
                  f"#TV relative spread {100 * drift['tv_relative_spread']:.1f}% "
                  f"({'flat' if drift['tv_flat'] else 'not flat'} at a 10% threshold).")
        md.append("")
        md.append("Qualitative replication check (informational, not a pass/fail criterion): "
                  + ("consistent with rising #sTV VOT and stable #TV VOT."
                     if drift["consistent"] else "not consistent with rising #sTV VOT and stable #TV VOT."))
    if notes:
        md += ["", "## Notes", ""] + [f"- {n}" for n in notes]
    md.append("")
    save("report.md", "\n".join(md))
    return ReportResult(out_dir / "report.md", gens, files, drift, notes)
