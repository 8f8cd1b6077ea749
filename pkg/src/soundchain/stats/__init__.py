"""Regression models, summary tables and densities for VOT and spectral data."""

from .glm import (
    FAMILIES,
    Contrast,
    Design,
    Factor,
    GlmFit,
    GlmSpec,
    build_design,
    fit_glm,
    get_family,
    irls_fit,
    natural_key,
    pairwise_contrasts,
)
from .published import Check, verify_published
from .summary import (
    GRID_COLUMNS,
    SUMMARY_COLUMNS,
    DensityCurve,
    GridCell,
    SummaryRow,
    binned_interaction_summary,
    kde,
    silverman_bandwidth,
    summary_table,
)

__all__ = [
    "FAMILIES", "Contrast", "Design", "Factor", "GlmFit", "GlmSpec", "build_design", "fit_glm",
    "get_family", "irls_fit", "natural_key", "pairwise_contrasts", "Check", "verify_published",
    "GRID_COLUMNS", "SUMMARY_COLUMNS", "DensityCurve", "GridCell", "SummaryRow",
    "binned_interaction_summary", "kde", "silverman_bandwidth", "summary_table",
]
