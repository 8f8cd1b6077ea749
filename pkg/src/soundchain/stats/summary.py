"""Descriptive tables, kernel densities and binned trajectory grids."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateBandwidth, EmptyData, TooFewPoints
from .glm import natural_key

STRUCTURES = ("TV", "STV")
MOMENTS = ("cog_hz", "sd_hz", "skew", "kurtosis")


def _num(v):
    if v is None or v == "":
        return None
    x = float(v)
    return None if math.isnan(x) else x


# ---- summary table ---------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    generation: str
    structure: str
    n: int
    n_vot: int
    mean_vot_ms: float | None
    sd_vot_ms: float | None
    proportion_stv: float

    def as_dict(self):
        return {"generation": self.generation, "structure": self.structure, "n": self.n,
                "n_vot": self.n_vot, "mean_vot_ms": self.mean_vot_ms, "sd_vot_ms": self.sd_vot_ms,
                "proportion_stv": self.proportion_stv}


SUMMARY_COLUMNS = ["generation", "structure", "n", "n_vot", "mean_vot_ms", "sd_vot_ms", "proportion_stv"]


def summary_table(rows, *, generation="generation", structure="label", value="vot_ms"):
    """Counts, VOT mean and sample SD per generation and structure.

    ``n`` counts every row of the structure, ``n_vot`` only those with a
    numeric ``value``. ``proportion_stv`` is the #sTV share of the
    generation's #TV + #sTV rows. The SD uses the n-1 denominator and is
    ``None`` below two values. Rows with other labels are ignored.
    """
    rows = list(rows)
    if not rows:
        raise EmptyData("summary_table needs at least one row")
    counts = defaultdict(int)
    values = defaultdict(list)
    gens = set()
    for r in rows:
        lab = str(r[structure])
        if lab not in STRUCTURES:
            continue
        g = str(r[generation])
        gens.add(g)
        counts[g, lab] += 1
        v = _num(r.get(value))
        if v is not None:
            values[g, lab].append(v)
    if not gens:
        raise EmptyData("no #TV or #sTV rows")
    out = []
    for g in sorted(gens, key=natural_key):
        total = counts[g, "TV"] + counts[g, "STV"]
        for lab in STRUCTURES:
            if counts[g, lab] == 0:
                continue
            v = np.asarray(values[g, lab])
            mean = float(v.mean()) if v.size else None
            sd = float(v.std(ddof=1)) if v.size > 1 else None
            out.append(SummaryRow(g, lab, counts[g, lab], int(v.size), mean, sd, counts[g, "STV"] / total))
    return out


# ---- kernel density -----------------------------------------------------------------

@dataclass(frozen=True)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def rows(self):
        return [{"x": float(x), "density": float(d)} for x, d in zip(self.grid, self.density)]


def silverman_bandwidth(values) -> float:
    """0.9 * min(sd, IQR / 1.34) * n^(-1/5), falling back to the SD when the IQR is 0."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise TooFewPoints("need at least two values")
    sd = float(x.std(ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    lo = min(sd, (q75 - q25) / 1.34)
    if lo <= 0:
        lo = sd
    if lo <= 0:
        raise DegenerateBandwidth("all values are equal, bandwidth would be 0")
    return 0.9 * lo * x.size ** -0.2


def kde(values, bandwidth="silverman", n_grid=512) -> DensityCurve:
    """Gaussian kernel density on ``n_grid`` points over [min - 3h, max + 3h].

    The tails beyond 3h are cut off, so the curve is rescaled to unit
    trapezoid area over the grid.
    """
    x = np.asarray([v for v in values], dtype=float)
    if x.size < 2:
        raise TooFewPoints("need at least two values")
    if bandwidth == "silverman":
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise DegenerateBandwidth("bandwidth must be positive")
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, n_grid)
    u = (grid[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * u * u).sum(axis=1) / (x.size * h * math.sqrt(2 * math.pi))
    dens /= np.trapezoid(dens, grid)
    return DensityCurve(grid, dens, h)


# ---- binned trajectory grid ------------------------------------------------------------

@dataclass(frozen=True)
class GridCell:
    bin_index: int
    bin_lo: float
    bin_hi: float
    generation: str
    decile: int
    n: int
    cog_hz: float
    sd_hz: float
    skew: float
    kurtosis: float

    @property
    def empty(self) -> bool:
        return self.n == 0

    def as_dict(self):
        return {"bin_index": self.bin_index, "bin_lo": self.bin_lo, "bin_hi": self.bin_hi,
                "generation": self.generation, "decile": self.decile, "n": self.n,
                "cog_hz": self.cog_hz, "sd_hz": self.sd_hz, "skew": self.skew,
                "kurtosis": self.kurtosis, "empty": self.empty}


GRID_COLUMNS = ["bin_index", "bin_lo", "bin_hi", "generation", "decile", "n", "cog_hz", "sd_hz",
                "skew", "kurtosis", "empty"]


def binned_interaction_summary(trajectories, duration_bins=5, generation=None, *, label=None):
    """Mean spectral moments per (duration bin, generation, decile).

    ``trajectories`` are trajectory-CSV rows. ``duration_bins`` is a bin
    count (equal widths over the observed durations) or an increasing list of
    edges; durations outside the edges go to the nearest end bin. With
    ``generation`` (one name or a list) or ``label`` only matching rows are
    used. Every combination appears in the output; cells without data have
    ``n == 0`` and NaN moments rather than interpolated values. Moments that
    were undefined for a window are skipped in that cell's means.
    """
    rows = list(trajectories)
    if generation is not None:
        keep = {generation} if isinstance(generation, str) else set(generation)
        rows = [r for r in rows if str(r["generation"]) in keep]
    if label is not None:
        rows = [r for r in rows if str(r["label"]) == label]
    if not rows:
        raise EmptyData("no trajectory rows to summarize")
    durations = np.array([float(r["duration_s"]) for r in rows])
    if np.isscalar(duration_bins) or isinstance(duration_bins, int):
        k = int(duration_bins)
        if k < 1:
            raise ValueError("need at least one duration bin")
        lo, hi = float(durations.min()), float(durations.max())
        edges = np.linspace(lo, hi if hi > lo else lo + 1e-9, k + 1)
    else:
        edges = np.asarray(duration_bins, dtype=float)
        if edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be increasing")
    nbins = edges.size - 1
    idx = np.clip(np.searchsorted(edges, durations, side="right") - 1, 0, nbins - 1)
    gens = sorted({str(r["generation"]) for r in rows}, key=natural_key)
    deciles = sorted({int(r["decile"]) for r in rows})
    acc = defaultdict(lambda: {"n": 0, **{m: [] for m in MOMENTS}})
    for r, b in zip(rows, idx):
        cell = acc[int(b), str(r["generation"]), int(r["decile"])]
        cell["n"] += 1
        for m in MOMENTS:
            v = _num(r.get(m))
            if v is not None:
                cell[m].append(v)
    out = []
    for b in range(nbins):
        for g in gens:
            for d in deciles:
                cell = acc.get((b, g, d))
                n = 0 if cell is None else cell["n"]
                means = {m: (float(np.mean(cell[m])) if cell is not None and cell[m] else float("nan"))
                         for m in MOMENTS}
                out.append(GridCell(b, float(edges[b]), float(edges[b + 1]), g, d, n, **means))
    return out
