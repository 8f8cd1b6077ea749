"""Generalized linear models fitted by iteratively reweighted least squares.

Designs are treatment coded: every factor has a reference level whose rows
get all-zero dummies, and the optional interaction columns are products of
the dummies of two factors. With a full interaction the model is saturated,
so the fitted mean of every cell equals that cell's sample mean.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from ..errors import DomainError, LevelError, NotConverged, SingularDesign

FAMILIES = ("gaussian_identity", "gamma_log", "poisson_log", "negbin_log", "binomial_logit")
THETA_LIMIT = 1e6


# ---- links and families ----------------------------------------------------

class _Link:
    def __init__(self, name, fwd, inv, dmu):
        self.name, self.fwd, self.inv, self.dmu = name, fwd, inv, dmu


def _expit(eta):
    return special.expit(eta)


LINKS = {
    "identity": _Link("identity", lambda mu: mu, lambda eta: eta, lambda eta: np.ones_like(eta)),
    "log": _Link("log", np.log, np.exp, np.exp),
    "logit": _Link("logit", special.logit, _expit, lambda eta: _expit(eta) * (1.0 - _expit(eta))),
}


def _xlogy_ratio(y, mu):
    # y * log(y / mu) with the 0 * log 0 = 0 convention
    return special.xlogy(y, y) - special.xlogy(y, mu)


class Family:
    """Variance function, deviance and log-likelihood of one response family."""

    name = ""
    link = "identity"
    fixed_scale = False
    stat_name = "t"

    def check(self, y, w):
        pass

    def init_mu(self, y, w):
        return (y + np.average(y, weights=w)) / 2.0

    def variance(self, mu):
        raise NotImplementedError

    def unit_deviance(self, y, mu):
        raise NotImplementedError

    def loglik(self, y, mu, w, scale):
        raise NotImplementedError

    def n_scale_params(self):
        return 0 if self.fixed_scale else 1


class Gaussian(Family):
    name, link = "gaussian_identity", "identity"

    def init_mu(self, y, w):
        return y.astype(float).copy()

    def variance(self, mu):
        return np.ones_like(mu)

    def unit_deviance(self, y, mu):
        return (y - mu) ** 2

    def loglik(self, y, mu, w, scale):
        n = w.sum()
        dev = np.sum(w * (y - mu) ** 2)
        return -0.5 * n * (math.log(2 * math.pi * dev / n) + 1.0)


class Gamma(Family):
    name, link = "gamma_log", "log"

    def check(self, y, w):
        if np.any(y <= 0):
            raise DomainError("gamma responses must be positive")

    def variance(self, mu):
        return mu ** 2

    def unit_deviance(self, y, mu):
        return 2.0 * ((y - mu) / mu - np.log(y / mu))

    def loglik(self, y, mu, w, scale):
        # scale as the maximum-likelihood-style deviance / n estimate
        shape = 1.0 / scale
        return float(np.sum(w * stats.gamma.logpdf(y, shape, scale=mu / shape)))


class Poisson(Family):
    name, link, fixed_scale, stat_name = "poisson_log", "log", True, "z"

    def check(self, y, w):
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise DomainError("count responses must be non-negative integers")

    def init_mu(self, y, w):
        return y + 0.1

    def variance(self, mu):
        return mu

    def unit_deviance(self, y, mu):
        return 2.0 * (_xlogy_ratio(y, mu) - (y - mu))

    def loglik(self, y, mu, w, scale):
        return float(np.sum(w * stats.poisson.logpmf(y, mu)))


class NegBin(Poisson):
    name = "negbin_log"

    def __init__(self, theta=1.0):
        self.theta = float(theta)

    def variance(self, mu):
        return mu + mu ** 2 / self.theta

    def unit_deviance(self, y, mu):
        th = self.theta
        return 2.0 * (_xlogy_ratio(y, mu) - (y + th) * np.log((y + th) / (mu + th)))

    def loglik(self, y, mu, w, scale):
        return float(np.sum(w * _negbin_ll_terms(y, mu, self.theta)))


class Binomial(Family):
    name, link, fixed_scale, stat_name = "binomial_logit", "logit", True, "z"

    def check(self, y, w):
        if np.any(y < 0) or np.any(y > 1):
            raise DomainError("binomial responses are proportions in [0, 1]")

    def init_mu(self, y, w):
        return (w * y + 0.5) / (w + 1.0)

    def variance(self, mu):
        return mu * (1.0 - mu)

    def unit_deviance(self, y, mu):
        return 2.0 * (_xlogy_ratio(y, mu) + _xlogy_ratio(1.0 - y, 1.0 - mu))

    def loglik(self, y, mu, w, scale):
        k = np.round(w * y)
        return float(np.sum(stats.binom.logpmf(k, np.round(w), mu)))


def _negbin_ll_terms(y, mu, theta):
    return (special.gammaln(y + theta) - special.gammaln(theta) - special.gammaln(y + 1)
            + theta * np.log(theta / (theta + mu)) + special.xlogy(y, mu / (theta + mu)))


def get_family(name: str) -> Family:
    table = {"gaussian_identity": Gaussian, "gamma_log": Gamma, "poisson_log": Poisson,
             "negbin_log": NegBin, "binomial_logit": Binomial}
    if name not in table:
        raise ValueError(f"unknown family {name!r}; expected one of {FAMILIES}")
    return table[name]()


# ---- designs -------------------------------------------------------------------

def natural_key(s: str):
    """Sort key that orders ``Gen2`` before ``Gen10``."""
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", str(s))]


@dataclass(frozen=True)
class Factor:
    """A categorical predictor; ``levels`` fixes the expected level set."""

    column: str
    reference: str
    levels: tuple | None = None


@dataclass(frozen=True)
class GlmSpec:
    family: str
    response: str
    factors: tuple = ()
    interaction: bool = True
    weights: str | None = None

    def __post_init__(self):
        get_family(self.family)


@dataclass
class Design:
    X: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    names: list
    levels: dict
    spec: GlmSpec

    def column_vector(self, assignment: dict) -> np.ndarray:
        """Design row for one cell, ``assignment`` mapping factor column to level."""
        return _row_vector(self.spec, self.levels, assignment)


def _row_vector(spec, levels, assignment):
    parts = [1.0]
    dummies = []
    for f in spec.factors:
        d = [1.0 if assignment[f.column] == lv else 0.0 for lv in levels[f.column][1:]]
        dummies.append(d)
        parts.extend(d)
    if spec.interaction:
        for i, j in itertools.combinations(range(len(spec.factors)), 2):
            parts.extend(a * b for a in dummies[i] for b in dummies[j])
    return np.array(parts)


def _resolve_levels(f: Factor, values):
    seen = sorted(set(values), key=natural_key)
    if f.levels is not None:
        levels = [str(v) for v in f.levels]
        unknown = [v for v in seen if v not in levels]
        if unknown:
            raise LevelError(f"{f.column}: values {unknown} are not declared levels")
        missing = [v for v in levels if v not in seen]
        if missing:
            raise LevelError(f"{f.column}: levels {missing} have no rows")
    else:
        levels = seen
    if f.reference not in levels:
        raise LevelError(f"{f.column}: reference level {f.reference!r} not among {levels}")
    return [f.reference] + [v for v in levels if v != f.reference]


def build_design(rows, spec: GlmSpec) -> Design:
    """Treatment-coded design matrix and response for ``rows`` (mappings).

    Columns are ``(Intercept)``, the non-reference levels of each factor in
    declaration order, then ``a:b`` products for every pair of factors.
    """
    rows = list(rows)
    if not rows:
        raise LevelError("no rows")
    levels = {}
    for f in spec.factors:
        levels[f.column] = _resolve_levels(f, [str(r[f.column]) for r in rows])
    names = ["(Intercept)"]
    for f in spec.factors:
        names.extend(levels[f.column][1:])
    if spec.interaction:
        for i, j in itertools.combinations(range(len(spec.factors)), 2):
            a, b = spec.factors[i].column, spec.factors[j].column
            names.extend(f"{x}:{y}" for x in levels[a][1:] for y in levels[b][1:])
    X = np.empty((len(rows), len(names)))
    y = np.empty(len(rows))
    w = np.ones(len(rows))
    for i, r in enumerate(rows):
        X[i] = _row_vector(spec, levels, {f.column: str(r[f.column]) for f in spec.factors})
        try:
            y[i] = float(r[spec.response])
            if spec.weights is not None:
                w[i] = float(r[spec.weights])
        except (TypeError, ValueError) as exc:
            raise DomainError(f"row {i}: non-numeric response or weight") from exc
    if not np.all(np.isfinite(y)):
        raise DomainError("responses must be finite")
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        raise SingularDesign(f"design has rank {rank} < {X.shape[1]} columns (empty cell?)")
    return Design(X, y, w, names, levels, spec)


# ---- fitting -------------------------------------------------------------------

@dataclass
class GlmFit:
    family: str
    names: list
    coef: np.ndarray
    se: np.ndarray
    stat: np.ndarray
    p: np.ndarray
    stat_name: str
    cov: np.ndarray
    deviance: float
    dispersion: float
    aic: float
    df_resid: int
    converged: bool
    iterations: int
    fitted: np.ndarray = field(repr=False)
    theta: float | None = None
    fallback: str | None = None
    design: Design | None = field(default=None, repr=False)

    def __getitem__(self, name):
        return float(self.coef[self.names.index(name)])

    def table(self):
        """One dict per coefficient: name, estimate, se, statistic, p."""
        return [{"term": n, "estimate": float(b), "se": float(s), self.stat_name: float(t), "p": float(p)}
                for n, b, s, t, p in zip(self.names, self.coef, self.se, self.stat, self.p)]

    def to_text(self, digits=4) -> str:
        head = ["term", "estimate", "se", self.stat_name, "p"]
        body = [[r["term"]] + [f"{r[k]:.{digits}f}" for k in head[1:]] for r in self.table()]
        widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
        lines = ["  ".join(str(x).rjust(wd) if i else str(x).ljust(wd) for i, (x, wd) in enumerate(zip(row, widths)))
                 for row in [head] + body]
        return "\n".join(lines)


def _wls(X, z, W):
    sw = np.sqrt(W)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)
    return beta


def _irls(X, y, w, fam: Family, max_iter, tol, beta0=None):
    link = LINKS[fam.link]
    if beta0 is None:
        mu = fam.init_mu(y, w)
        eta = link.fwd(mu)
    else:
        eta = X @ beta0
        mu = link.inv(eta)
    dev_old = np.inf
    beta = beta0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d = link.dmu(eta)
        W = w * d ** 2 / fam.variance(mu)
        z = eta + (y - mu) / d
        new = _wls(X, z, W)
        # step halving keeps the deviance finite
        for _ in range(30):
            eta_new = X @ new
            mu_new = link.inv(eta_new)
            dev = float(np.sum(w * fam.unit_deviance(y, mu_new)))
            if np.isfinite(dev) or beta is None:
                break
            new = (new + beta) / 2.0
        step = np.inf if beta is None else float(np.max(np.abs(new - beta)))
        beta, eta, mu = new, eta_new, mu_new
        # deviance is flat near the optimum, so also require the coefficients to settle
        if abs(dev - dev_old) / (abs(dev) + 0.1) < tol and step <= tol * (float(np.max(np.abs(beta))) + 0.1):
            converged = True
            break
        dev_old = dev
    return beta, mu, eta, dev, converged, it


def _theta_ml(y, mu, w):
    def nll(log_theta):
        return -float(np.sum(w * _negbin_ll_terms(y, mu, math.exp(log_theta))))

    res = optimize.minimize_scalar(nll, bounds=(-20.0, math.log(10 * THETA_LIMIT)), method="bounded",
                                   options={"xatol": 1e-10})
    return math.exp(res.x)


def irls_fit(design, response=None, family=None, *, names=None, weights=None, max_iter=100,
             tol=1e-10) -> GlmFit:
    """Fit a GLM by iteratively reweighted least squares.

    ``design`` is a :class:`Design` (response and weights taken from it) or a
    plain matrix together with ``response``. Standard errors come from the
    inverse Fisher information scaled by the Pearson dispersion for gamma and
    gaussian fits. ``negbin_log`` alternates IRLS with a maximum-likelihood
    update of theta; when theta exceeds ``THETA_LIMIT`` the data show no
    overdispersion and the Poisson fit is returned with ``fallback`` set.

    Raises ``NotConverged`` (carrying the partial fit) after ``max_iter``
    iterations without meeting ``tol``. Convergence needs both the relative
    deviance change and the largest coefficient change (relative to the
    largest coefficient) below ``tol``.
    """
    d_obj = design if isinstance(design, Design) else None
    if d_obj is not None:
        X, y, w, names = d_obj.X, d_obj.y, d_obj.weights, d_obj.names
        family = d_obj.spec.family if family is None else family
    else:
        X = np.atleast_2d(np.asarray(design, dtype=float))
        y = np.asarray(response, dtype=float)
        w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
        names = list(names) if names is not None else [f"x{i}" for i in range(X.shape[1])]
        if family is None:
            raise ValueError("family is required when fitting a bare matrix")
    if X.shape[0] != y.shape[0]:
        raise ValueError("design and response lengths differ")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesign("design matrix is rank deficient")
    fam = get_family(family)
    fam.check(y, w)

    theta, fallback = None, None
    if isinstance(fam, NegBin):
        beta, mu, eta, dev, converged, it = _irls(X, y, w, Poisson(), max_iter, tol)
        for _ in range(50):
            new_theta = _theta_ml(y, mu, w)
            if new_theta > THETA_LIMIT:
                fam, theta = Poisson(), None
                fallback = (f"negbin theta diverged (> {THETA_LIMIT:g}); "
                            "poisson_log fit reported (identical point estimates)")
                beta, mu, eta, dev, converged, it = _irls(X, y, w, fam, max_iter, tol)
                break
            fam.theta = new_theta
            beta, mu, eta, dev, converged, it = _irls(X, y, w, fam, max_iter, tol, beta0=beta)
            if theta is not None and abs(new_theta - theta) <= 1e-8 * theta:
                theta = new_theta
                break
            theta = new_theta
    else:
        beta, mu, eta, dev, converged, it = _irls(X, y, w, fam, max_iter, tol)

    link = LINKS[fam.link]
    dmu = link.dmu(eta)
    W = w * dmu ** 2 / fam.variance(mu)
    n, p = X.shape
    df_resid = n - p
    if fam.fixed_scale:
        dispersion = 1.0
    else:
        pearson = float(np.sum(w * (y - mu) ** 2 / fam.variance(mu)))
        dispersion = pearson / df_resid if df_resid > 0 else float("nan")
    info = X.T @ (X * W[:, None])
    cov = dispersion * np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = beta / se
    if fam.stat_name == "t" and df_resid > 0:
        pv = 2.0 * stats.t.sf(np.abs(stat), df_resid)
    else:
        pv = 2.0 * stats.norm.sf(np.abs(stat))

    # AIC with the deviance / n scale estimate for dispersion families
    scale = dev / w.sum() if not fam.fixed_scale else 1.0
    k = p + fam.n_scale_params() + (1 if theta is not None else 0)
    try:
        aic = -2.0 * fam.loglik(y, mu, w, scale) + 2.0 * k
    except (ValueError, ZeroDivisionError, FloatingPointError):
        aic = float("nan")

    fit = GlmFit(fam.name, list(names), beta, se, stat, pv, fam.stat_name, cov, dev, dispersion,
                 float(aic), df_resid, converged, it, mu, theta, fallback, d_obj)
    if not converged:
        raise NotConverged(f"IRLS did not converge in {max_iter} iterations", fit=fit)
    return fit


def fit_glm(rows, spec: GlmSpec, **kwargs) -> GlmFit:
    return irls_fit(build_design(rows, spec), family=spec.family, **kwargs)


# ---- contrasts -----------------------------------------------------------------

@dataclass(frozen=True)
class Contrast:
    label: str
    level_a: str
    level_b: str
    estimate: float
    se: float
    ratio: float | None
    ratio_se: float | None
    z: float
    p: float
    p_adjusted: float


def pairwise_contrasts(fit: GlmFit, factor: str, within_level: str | None = None, *,
                       adjust: str = "none", pairs=None):
    """All pairwise differences between the levels of ``factor``.

    With two factors, ``within_level`` picks the level of the other factor
    at which the comparison is made. Differences are on the link scale and,
    for log links, also exponentiated to ratios (delta-method SE). Pairs
    follow the factor's level order with the reference level first.
    ``pairs`` overrides the list of ``(a, b)`` level pairs. ``adjust`` is
    ``"none"`` or ``"bonferroni"`` (p times the number of contrasts, capped
    at 1).
    """
    if not fit.converged:
        raise NotConverged("contrasts need a converged fit", fit=fit)
    if fit.design is None:
        raise ValueError("fit carries no design; fit it from build_design output")
    if adjust not in ("none", "bonferroni"):
        raise ValueError("adjust must be 'none' or 'bonferroni'")
    spec, levels = fit.design.spec, fit.design.levels
    if factor not in levels:
        raise LevelError(f"unknown factor {factor!r}")
    others = [f.column for f in spec.factors if f.column != factor]
    base = {}
    for col in others:
        if within_level is None:
            base[col] = levels[col][0]
        elif within_level in levels[col]:
            base[col] = within_level
        else:
            base[col] = levels[col][0]
    if within_level is not None and within_level not in base.values():
        raise LevelError(f"level {within_level!r} not found in the other factors")
    vec = {}
    for lv in levels[factor]:
        vec[lv] = fit.design.column_vector({**base, factor: lv})
    pairs = list(itertools.combinations(levels[factor], 2)) if pairs is None else list(pairs)
    for a, b in pairs:
        if a not in vec or b not in vec:
            raise LevelError(f"{factor}: unknown level in pair {(a, b)}")
    log_link = LINKS[get_family(fit.family).link].name == "log"
    out = []
    for a, b in pairs:
        c = vec[a] - vec[b]
        est = float(c @ fit.coef)
        se = float(math.sqrt(max(c @ fit.cov @ c, 0.0)))
        z = est / se if se > 0 else 0.0
        p = float(2.0 * stats.norm.sf(abs(z))) if se > 0 else 1.0
        p_adj = min(1.0, p * len(pairs)) if adjust == "bonferroni" else p
        ratio = math.exp(est) if log_link else None
        out.append(Contrast(f"{a} / {b}", a, b, est, se, ratio, ratio * se if log_link else None,
                            z, p, p_adj))
    return out

