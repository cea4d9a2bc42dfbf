"""Model selection, residuals, goodness-of-fit and risk comparisons."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import special, stats

from . import composite
from .errors import DataError, DomainError
from .regression import FitConfig, RegressionModel, fit, location, predict_cdf, predict_sf, predict_var

__all__ = [
    "aic_bic",
    "pit",
    "quantile_residuals",
    "ks_statistic",
    "cvm_statistic",
    "ad_statistic",
    "gof_statistics",
    "GofReport",
    "gof_tests",
    "qq_data",
    "empirical_risk",
    "RiskComparison",
    "risk_comparison",
    "mse_q",
    "shapiro_francia",
]

log = logging.getLogger(__name__)

RESIDUAL_CLAMP = 8.0


def aic_bic(nll: float, m: int, n: int) -> tuple[float, float]:
    """AIC = 2 nll + 2m and BIC = 2 nll + m log n."""
    if n < 1 or m < 0:
        raise DomainError("aic_bic needs n >= 1 and m >= 0")
    return 2.0 * nll + 2.0 * m, 2.0 * nll + m * math.log(n)


def _design(y, X):
    y = np.asarray(y, dtype=float)
    if X is None:
        X = np.ones((y.shape[0], 1))
    return y, np.asarray(X, dtype=float)


def pit(model: RegressionModel, y, X=None) -> np.ndarray:
    """Probability integral transform F(y_i | x_i)."""
    y, X = _design(y, X)
    return np.asarray(predict_cdf(model, y, X), dtype=float)


def quantile_residuals(model: RegressionModel, y, X=None) -> np.ndarray:
    """Normal scores Phi^{-1}(F(y_i | x_i)), clamped to +-8.

    The upper half is computed from the survival function so residuals stay
    accurate far into the tail.  Scores that hit the clamp are logged.
    """
    y, X = _design(y, X)
    lower = np.asarray(predict_cdf(model, y, X), dtype=float)
    upper = np.asarray(predict_sf(model, y, X), dtype=float)
    with np.errstate(divide="ignore"):
        res = np.where(lower < 0.5, special.ndtri(lower), -special.ndtri(upper))
    clipped = ~np.isfinite(res) | (np.abs(res) > RESIDUAL_CLAMP)
    if np.any(clipped):
        log.warning("%d quantile residuals clamped to +-%g", int(clipped.sum()), RESIDUAL_CLAMP)
    return np.clip(np.nan_to_num(res, nan=0.0, posinf=RESIDUAL_CLAMP, neginf=-RESIDUAL_CLAMP), -RESIDUAL_CLAMP, RESIDUAL_CLAMP)


def ks_statistic(z) -> float:
    """sup |F_n - F| from PIT values."""
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - z), np.max(z - (i - 1) / n)))


def cvm_statistic(z) -> float:
    """Cramer-von Mises W^2 = sum (z_(i) - (2i-1)/(2n))^2 + 1/(12n)."""
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    i = np.arange(1, n + 1)
    return float(np.sum((z - (2 * i - 1) / (2.0 * n)) ** 2) + 1.0 / (12.0 * n))


def ad_statistic(z) -> float:
    """Anderson-Darling A^2; infinite when a PIT value sits exactly at 0 or 1."""
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    if np.any(z <= 0.0) or np.any(z >= 1.0):
        return math.inf
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) * (np.log(z) + np.log1p(-z[::-1]))) / n)


def gof_statistics(z) -> dict:
    return {"ks": ks_statistic(z), "cvm": cvm_statistic(z), "ad": ad_statistic(z)}


@dataclass
class GofReport:
    """Goodness-of-fit statistics with parametric-bootstrap p-values."""

    ks: float
    ad: float
    cvm: float
    p_ks: float
    p_ad: float
    p_cvm: float
    qq_correlation: float
    n_boot: int
    seed: Optional[int]
    n_failed: int = 0
    boot_stats: dict = field(default_factory=dict, repr=False)

    def to_dict(self, include_replicates: bool = False) -> dict:
        d = asdict(self)
        if not include_replicates:
            d.pop("boot_stats")
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


def _boot_replicate(args):
    """Sample from the fitted law, refit from a warm start, return statistics."""
    model, n, seed_seq, config = args
    rng = np.random.default_rng(seed_seq)
    mu2 = math.exp(model.beta[0])
    y = composite.sample(n, model.base().with_mu2(mu2), seed=rng)
    X = np.ones((n, 1))
    try:
        refit, _ = fit(y, X, model.family, config, start=model, covariate_names=model.covariate_names)
    except Exception as exc:  # a failed refit is counted, not fatal
        return None, f"{type(exc).__name__}: {exc}"
    return gof_statistics(pit(refit, y, X)), None


def gof_tests(
    y,
    model: RegressionModel,
    n_boot: int = 2000,
    seed: Optional[int] = None,
    threads: int = 1,
    config: Optional[FitConfig] = None,
) -> GofReport:
    """KS, AD and CvM tests for an intercept-only fit with bootstrap p-values.

    Each replicate draws n values from the fitted distribution, refits the
    same family (warm-started at the observed fit) and recomputes the
    statistics.  The p-value is the fraction of successful replicates whose
    statistic strictly exceeds the observed one.
    """
    y = np.asarray(y, dtype=float)
    if model.beta.shape[0] != 1:
        raise DomainError("goodness-of-fit tests apply to intercept-only fits")
    if n_boot < 1:
        raise DomainError("n_boot must be >= 1")
    X = np.ones((y.shape[0], 1))
    observed = gof_statistics(pit(model, y, X))
    _, _, qq_r = qq_data(model, y, X)
    if config is None:
        config = FitConfig(restarts=0, compute_se=False)
    else:
        config = replace(config, restarts=0, compute_se=False)
    children = np.random.SeedSequence(seed).spawn(n_boot)
    tasks = [(model, y.shape[0], child, config) for child in children]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_boot_replicate, tasks, chunksize=max(1, n_boot // (4 * threads))))
    else:
        results = [_boot_replicate(t) for t in tasks]
    boot = {"ks": [], "cvm": [], "ad": []}
    failures = 0
    for stat, err in results:
        if stat is None:
            failures += 1
            log.warning("bootstrap refit failed: %s", err)
            continue
        for key in boot:
            boot[key].append(stat[key])
    pvals = {}
    for key, values in boot.items():
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            pvals[key] = math.nan
        elif math.isinf(observed[key]):
            pvals[key] = 0.0
        else:
            pvals[key] = float(np.mean(arr > observed[key]))
    return GofReport(
        ks=observed["ks"],
        ad=observed["ad"],
        cvm=observed["cvm"],
        p_ks=pvals["ks"],
        p_ad=pvals["ad"],
        p_cvm=pvals["cvm"],
        qq_correlation=qq_r,
        n_boot=n_boot,
        seed=seed,
        n_failed=failures,
        boot_stats=boot,
    )


def qq_data(model: RegressionModel, y, X=None) -> tuple[np.ndarray, np.ndarray, float]:
    """Normal QQ pairs of sorted quantile residuals and their correlation R."""
    res = np.sort(quantile_residuals(model, y, X))
    n = res.size
    theo = special.ndtri((np.arange(1, n + 1) - 0.5) / n)
    if n < 2:
        return theo, res, math.nan
    r = float(np.corrcoef(theo, res)[0, 1])
    return theo, res, r


def empirical_risk(y, q: float, method: str = "linear") -> tuple[float, float]:
    """Empirical VaR (sample quantile) and TVaR (mean strictly beyond VaR).

    Args:
        y: Observations.
        q: Level in (0, 1).
        method: Any ``numpy.quantile`` method; the default is linear
            interpolation of order statistics.

    Raises:
        DataError: No observation lies strictly above VaR in a non-constant
            sample.
    """
    y = np.asarray(y, dtype=float)
    if not 0.0 < q < 1.0:
        raise DomainError("q must lie in (0, 1)")
    if y.size < 2:
        raise DataError("empirical risk needs at least two observations")
    var = float(np.quantile(y, q, method=method))
    tail = y[y > var]
    if tail.size == 0:
        if np.all(y == y[0]):
            return var, var
        raise DataError(f"no observations above the empirical VaR at q={q}")
    return var, float(tail.mean())


@dataclass(frozen=True)
class RiskComparison:
    level: float
    empirical_var: float
    model_var: float
    empirical_tvar: float
    model_tvar: float

    @property
    def var_diff_pct(self) -> float:
        return 100.0 * (self.model_var - self.empirical_var) / self.empirical_var

    @property
    def tvar_diff_pct(self) -> float:
        return 100.0 * (self.model_tvar - self.empirical_tvar) / self.empirical_tvar

    def to_dict(self) -> dict:
        d = asdict(self)
        d["var_diff_pct"] = self.var_diff_pct
        d["tvar_diff_pct"] = self.tvar_diff_pct
        return d


def risk_comparison(model: RegressionModel, y, levels=(0.95, 0.99), x0=None, method: str = "linear") -> list[RiskComparison]:
    """Model VaR/TVaR at covariate row ``x0`` (default: baseline) against the sample."""
    k = model.beta.shape[0]
    if x0 is None:
        x0 = np.zeros(k)
        x0[0] = 1.0
    prm = model.base().with_mu2(location(x0, model.beta))
    out = []
    for q in levels:
        ev, et = empirical_risk(y, q, method=method)
        out.append(RiskComparison(q, ev, composite.var_q(q, prm), et, composite.tvar_q(q, prm)))
    return out


def mse_q(model: RegressionModel, y, X, q: float) -> float:
    """Sum of squared gaps between responses and their predicted VaR_q."""
    y, X = _design(y, X)
    pred = predict_var(model, X, q)
    return float(np.sum((y - pred) ** 2))


def shapiro_francia(x) -> tuple[float, float]:
    """Shapiro-Francia W' with Royston's normal approximation for the p-value."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    m = special.ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    w = float(np.corrcoef(x, m)[0, 1] ** 2)
    u = math.log(n)
    v = math.log(u)
    mu = -1.2725 + 1.0521 * (v - u)
    sigma = 1.0308 - 0.26758 * (v + 2.0 / u)
    z = (math.log1p(-w) - mu) / sigma
    return w, float(stats.norm.sf(z))
