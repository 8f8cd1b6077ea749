import math

import numpy as np
import pytest
import statsmodels.api as sm
from hypothesis import given, settings
from hypothesis import strategies as st

from soundchain.errors import (
    DegenerateBandwidth,
    DomainError,
    EmptyData,
    LevelError,
    NotConverged,
    SingularDesign,
    TooFewPoints,
)
from soundchain.stats import (
    Factor,
    GlmSpec,
    binned_interaction_summary,
    build_design,
    irls_fit,
    kde,
    pairwise_contrasts,
    summary_table,
    verify_published,
)
from soundchain.stats import published as P

GENS = ["Gen0", "Gen1", "Gen2", "Gen3", "Gen4"]
SPEC_5x2 = GlmSpec("gamma_log", "y", (Factor("structure", "#sTV"), Factor("generation", "Gen1")))


def grid_rows(values_by_cell):
    return [{"generation": g, "structure": s, "y": v}
            for (g, s), vals in values_by_cell.items() for v in vals]


# ---- design ---------------------------------------------------------------------

def test_design_columns():
    rows = grid_rows({(g, s): [1.0] for g in GENS for s in ("#TV", "#sTV")})
    d = build_design(rows, SPEC_5x2)
    assert d.X.shape == (10, 10)
    assert d.names == ["(Intercept)", "#TV", "Gen0", "Gen2", "Gen3", "Gen4",
                       "#TV:Gen0", "#TV:Gen2", "#TV:Gen3", "#TV:Gen4"]


def test_reference_rows_have_zero_dummies():
    rows = grid_rows({(g, s): [1.0] for g in GENS for s in ("#TV", "#sTV")})
    d = build_design(rows, SPEC_5x2)
    for r, x in zip(rows, d.X):
        if r["generation"] == "Gen1" and r["structure"] == "#sTV":
            assert x[0] == 1 and not np.any(x[1:])


def test_empty_cell_is_singular():
    cells = {(g, s): [1.0, 2.0] for g in GENS for s in ("#TV", "#sTV")}
    del cells["Gen3", "#sTV"]
    with pytest.raises(SingularDesign):
        build_design(grid_rows(cells), SPEC_5x2)


def test_missing_declared_level():
    spec = GlmSpec("gamma_log", "y", (Factor("generation", "Gen1", tuple(GENS)),))
    rows = [{"generation": g, "y": 1.0} for g in GENS[:4]]
    with pytest.raises(LevelError):
        build_design(rows, spec)


def test_unknown_reference():
    spec = GlmSpec("gamma_log", "y", (Factor("generation", "Gen9"),))
    with pytest.raises(LevelError):
        build_design([{"generation": "Gen1", "y": 1.0}], spec)


def test_levels_sorted_naturally():
    spec = GlmSpec("gaussian_identity", "y", (Factor("generation", "Gen1"),))
    rows = [{"generation": g, "y": float(i)} for i, g in enumerate(["Gen10", "Gen2", "Gen1", "Gen3"])]
    assert build_design(rows, spec).names == ["(Intercept)", "Gen2", "Gen3", "Gen10"]


# ---- fitting ----------------------------------------------------------------------

def test_intercept_only_gamma():
    fit = irls_fit(np.ones((3, 1)), [2.0, 4.0, 8.0], "gamma_log")
    assert fit.coef[0] == pytest.approx(math.log(14 / 3), abs=1e-12)
    assert fit.coef[0] == pytest.approx(1.5404, abs=1e-4)


def test_gamma_domain():
    with pytest.raises(DomainError):
        irls_fit(np.ones((3, 1)), [2.0, 0.0, 8.0], "gamma_log")


def test_count_domain():
    with pytest.raises(DomainError):
        irls_fit(np.ones((3, 1)), [2.0, 1.5, 8.0], "poisson_log")


def test_not_converged_carries_partial_fit():
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(50), rng.standard_normal(50)])
    y = rng.gamma(2.0, np.exp(0.5 * X[:, 1]))
    with pytest.raises(NotConverged) as ei:
        irls_fit(X, y, "gamma_log", max_iter=1)
    assert ei.value.fit is not None and not ei.value.fit.converged


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from(["gamma_log", "poisson_log"]))
def test_saturated_fit_reproduces_cell_means(seed, family):
    rng = np.random.default_rng(seed)
    cells = {}
    for g in GENS:
        for s in ("#TV", "#sTV"):
            n = int(rng.integers(1, 6))
            if family == "gamma_log":
                cells[g, s] = list(rng.gamma(2.0, rng.uniform(0.01, 0.1), n))
            else:
                cells[g, s] = list(rng.integers(1, 400, n).astype(float))
    d = build_design(grid_rows(cells), GlmSpec(family, "y", SPEC_5x2.factors))
    fit = irls_fit(d)
    for (g, s), vals in cells.items():
        mu = math.exp(d.column_vector({"generation": g, "structure": s}) @ fit.coef)
        assert mu == pytest.approx(np.mean(vals), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(-100, 100))
def test_identity_link_shift_changes_only_intercept(seed, c):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(40), rng.standard_normal((40, 2))])
    y = X @ [1.0, 2.0, -1.0] + rng.standard_normal(40)
    a = irls_fit(X, y, "gaussian_identity")
    b = irls_fit(X, y + c, "gaussian_identity")
    assert b.coef[0] == pytest.approx(a.coef[0] + c, abs=1e-8)
    np.testing.assert_allclose(b.coef[1:], a.coef[1:], atol=1e-8)


def test_simulated_gamma_coverage():
    # 5 x 2 saturated gamma design, n=5000 per cell, 100 replications
    truth = np.array([-3.2, 0.45, -0.4, 0.04, 0.09, 0.11, 0.38, -0.1, -0.14, -0.1])
    cells = [(g, s) for g in GENS for s in ("#TV", "#sTV")]
    rows = [{"generation": g, "structure": s, "y": 1.0} for g, s in cells for _ in range(5000)]
    d = build_design(rows, SPEC_5x2)
    mu = np.exp(d.X @ truth)
    shape = 4.0
    rng = np.random.default_rng(20240601)
    hits = total = 0
    for _ in range(100):
        y = rng.gamma(shape, mu / shape)
        fit = irls_fit(d.X, y, "gamma_log")
        hits += int(np.sum(np.abs(fit.coef - truth) <= 2 * fit.se))
        total += truth.size
    assert hits / total >= 0.93


# ---- independent oracle: statsmodels ---------------------------------------------------

def _random_glm_data(rng, n=300):
    X = np.column_stack([np.ones(n), rng.standard_normal(n), rng.integers(0, 2, n)])
    return X, X @ [0.5, 0.3, -0.4]


@pytest.mark.parametrize("seed", range(4))
def test_gamma_matches_statsmodels(seed):
    rng = np.random.default_rng(seed)
    X, eta = _random_glm_data(rng)
    y = rng.gamma(3.0, np.exp(eta) / 3.0)
    ours = irls_fit(X, y, "gamma_log")
    ref = sm.GLM(y, X, family=sm.families.Gamma(sm.families.links.Log())).fit(scale="X2", tol=1e-13)
    np.testing.assert_allclose(ours.coef, ref.params, rtol=1e-7)
    np.testing.assert_allclose(ours.se, ref.bse, rtol=1e-6)
    assert ours.deviance == pytest.approx(ref.deviance, rel=1e-8)


@pytest.mark.parametrize("seed", range(4))
def test_poisson_and_binomial_match_statsmodels(seed):
    rng = np.random.default_rng(seed)
    X, eta = _random_glm_data(rng)
    y = rng.poisson(np.exp(eta)).astype(float)
    ours = irls_fit(X, y, "poisson_log")
    ref = sm.GLM(y, X, family=sm.families.Poisson()).fit(tol=1e-13)
    np.testing.assert_allclose(ours.coef, ref.params, rtol=1e-7)
    np.testing.assert_allclose(ours.se, ref.bse, rtol=1e-6)
    assert ours.aic == pytest.approx(ref.aic, rel=1e-8)
    m = rng.integers(1, 20, X.shape[0]).astype(float)
    k = rng.binomial(m.astype(int), 1 / (1 + np.exp(-eta)))
    ours = irls_fit(X, k / m, "binomial_logit", weights=m)
    ref = sm.GLM(np.column_stack([k, m - k]), X, family=sm.families.Binomial()).fit(tol=1e-13)
    np.testing.assert_allclose(ours.coef, ref.params, rtol=1e-7)
    np.testing.assert_allclose(ours.se, ref.bse, rtol=1e-6)


def test_negbin_theta_matches_statsmodels():
    rng = np.random.default_rng(7)
    X, eta = _random_glm_data(rng, 2000)
    theta = 2.5
    y = rng.negative_binomial(theta, theta / (theta + np.exp(eta))).astype(float)
    ours = irls_fit(X, y, "negbin_log")
    ref = sm.NegativeBinomial(y, X).fit(disp=0, maxiter=200)
    assert ours.fallback is None
    np.testing.assert_allclose(ours.coef, ref.params[:-1], rtol=1e-4, atol=1e-6)
    assert 1.0 / ours.theta == pytest.approx(ref.params[-1], rel=1e-3)


def test_negbin_falls_back_without_overdispersion():
    fit = irls_fit(build_design(P.count_rows(), P.COUNT_SPEC))
    assert fit.family == "poisson_log" and "theta" in fit.fallback
    assert fit["(Intercept)"] == pytest.approx(math.log(1849), abs=1e-10)


# ---- contrasts -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def gamma_fit():
    return irls_fit(build_design(P.vot_rows(), P.GAMMA_SPEC))


def test_contrast_ratio_gen1_gen0(gamma_fit):
    cons = {c.label: c for c in pairwise_contrasts(gamma_fit, "generation", "#TV")}
    assert len(cons) == 10
    assert cons["Gen1 / Gen0"].ratio == pytest.approx(61.83 / 59.33, rel=1e-9)
    assert abs(cons["Gen1 / Gen0"].ratio - 1.0422) <= 0.01


def test_self_contrast(gamma_fit):
    (c,) = pairwise_contrasts(gamma_fit, "generation", "#TV", pairs=[("Gen2", "Gen2")])
    assert c.ratio == 1.0 and c.z == 0.0


def test_bonferroni(gamma_fit):
    raw = pairwise_contrasts(gamma_fit, "generation", "#sTV")
    adj = pairwise_contrasts(gamma_fit, "generation", "#sTV", adjust="bonferroni")
    for a, b in zip(raw, adj):
        assert b.p_adjusted == pytest.approx(min(1.0, a.p * len(raw)))


def test_contrast_needs_converged_fit(gamma_fit):
    import copy
    f = copy.copy(gamma_fit)
    f.converged = False
    with pytest.raises(NotConverged):
        pairwise_contrasts(f, "generation", "#TV")


# ---- summary table ---------------------------------------------------------------------

def test_summary_known_values():
    rows = [{"generation": "Gen1", "label": "TV", "vot_ms": v} for v in (10.0, 20.0, 30.0)]
    rows += [{"generation": "Gen1", "label": "STV", "vot_ms": 5.0}]
    tv, stv = summary_table(rows)
    assert (tv.structure, tv.n, tv.mean_vot_ms, tv.sd_vot_ms) == ("TV", 3, 20.0, 10.0)
    assert stv.sd_vot_ms is None and stv.mean_vot_ms == 5.0
    assert tv.proportion_stv == 0.25


def test_summary_proportions_at_scale():
    rows = [{"generation": "Gen1", "label": lab, "vot_ms": ""}
            for lab, n in (("TV", 1849), ("STV", 151)) for _ in range(n)]
    (tv, stv) = summary_table(rows)
    assert round(100 * stv.proportion_stv, 2) == 7.55
    assert stv.mean_vot_ms is None and stv.n_vot == 0


def test_summary_empty():
    with pytest.raises(EmptyData):
        summary_table([])


# ---- kde -------------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60).filter(lambda v: max(v) - min(v) > 1e-6))
def test_kde_is_a_density(values):
    c = kde(values)
    assert c.grid.size == 512
    assert np.all(c.density >= 0)
    assert abs(np.trapezoid(c.density, c.grid) - 1.0) <= 1e-3
    assert c.grid[0] == pytest.approx(min(values) - 3 * c.bandwidth)
    assert c.grid[-1] == pytest.approx(max(values) + 3 * c.bandwidth)


def test_kde_two_points_mean():
    c = kde([0.0, 1.0], bandwidth=0.5)
    mean = np.trapezoid(c.grid * c.density, c.grid)
    assert mean == pytest.approx(0.5, abs=1e-9)
    np.testing.assert_allclose(c.density, c.density[::-1], atol=1e-12)


def test_kde_errors():
    with pytest.raises(TooFewPoints):
        kde([1.0])
    with pytest.raises(DegenerateBandwidth):
        kde([2.0, 2.0, 2.0])


# ---- binned grid -----------------------------------------------------------------------

def _traj(tid, gen, dur, label="STV", moments=(3000.0, 1500.0, 0.5, 1.0)):
    return [{"id": tid, "generation": gen, "label": label, "decile": d, "cog_hz": moments[0],
             "sd_hz": moments[1], "skew": moments[2], "kurtosis": moments[3], "duration_s": dur}
            for d in range(1, 11)]


def test_single_trajectory_one_bin():
    cells = binned_interaction_summary(_traj("a", "Gen1", 0.03), [0.0, 0.02, 0.04, 0.06], "Gen1")
    occupied = {c.bin_index for c in cells if c.n}
    assert occupied == {1}
    assert sum(c.empty for c in cells) == 20


def test_constant_moments_flat_grid():
    rows = []
    rng = np.random.default_rng(0)
    for i in range(40):
        rows += _traj(f"t{i}", f"Gen{i % 3}", float(rng.uniform(0.01, 0.1)))
    cells = binned_interaction_summary(rows, 4)
    for c in cells:
        if c.n:
            assert (c.cog_hz, c.sd_hz, c.skew, c.kurtosis) == (3000.0, 1500.0, 0.5, 1.0)
        else:
            assert math.isnan(c.cog_hz)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["Gen1", "Gen2"]), st.floats(0.005, 0.15)), min_size=1, max_size=30),
       st.integers(1, 6))
def test_grid_counts_sum_per_decile(specs, nbins):
    rows = []
    for i, (g, dur) in enumerate(specs):
        rows += _traj(f"t{i}", g, dur)
    cells = binned_interaction_summary(rows, nbins)
    for d in range(1, 11):
        assert sum(c.n for c in cells if c.decile == d) == len(specs)


def test_grid_label_filter_and_empty():
    rows = _traj("a", "Gen1", 0.03, label="TV")
    with pytest.raises(EmptyData):
        binned_interaction_summary(rows, 3, label="STV")


# ---- published tables ---------------------------------------------------------------------

def test_published_tables_all_pass():
    checks = verify_published()
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]
    routes = {(c.table, c.route) for c in checks}
    assert ("count-model", "oracle") in routes and ("gamma-model", "oracle") in routes


def test_perturbed_count_fails_its_coefficient():
    counts = dict(P.PROPORTION_COUNTS)
    counts["Gen4"] = (1881, 140)
    failed = {(c.table, c.item) for c in verify_published(counts=counts) if not c.passed}
    assert ("count-model", "Gen4:#sTV") in failed
    assert ("proportion", "Gen4") in failed
    assert ("count-model", "Gen0:#sTV") not in failed


def test_perturbed_mean_fails_gamma():
    means = dict(P.VOT_MS)
    means["Gen3"] = (58.88, 24.52, 47.0, 20.63)
    failed = {(c.table, c.item) for c in verify_published(means=means) if not c.passed}
    assert ("gamma-model", "Gen3") in failed
    assert ("gamma-model", "Gen2") not in failed
