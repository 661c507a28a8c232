"""Small statistics toolbox: two-sample KS, Hill tail index, OLS, jackknife."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KS_CRITICAL_05 = 1.358


@dataclass(frozen=True)
class KsResult:
    d: float
    m: int
    n: int
    critical_05: float

    @property
    def passed(self) -> bool:
        return self.d < self.critical_05


@dataclass(frozen=True)
class HillEstimate:
    alpha_hat: float
    k: int
    ci95: tuple[float, float]


@dataclass(frozen=True)
class LinFit:
    slope: float
    intercept: float
    r2: float
    slope_se: float


@dataclass(frozen=True)
class Summary:
    mean: float
    variance: float
    se_mean: float
    se_variance: float


def ks_critical(m: int, n: int) -> float:
    return KS_CRITICAL_05 * np.sqrt((m + n) / (m * n))


def ks_two_sample(a, b) -> KsResult:
    """Two-sample Kolmogorov-Smirnov distance.

    Both empirical CDFs are evaluated at every pooled point after all equal
    values have been absorbed (``side="right"``), so ties are handled exactly.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_two_sample needs two nonempty samples")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ValueError("ks_two_sample got NaN samples")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    return KsResult(d=d, m=a.size, n=b.size, critical_05=float(ks_critical(a.size, b.size)))


def hill_tail_index(samples, k: int) -> HillEstimate:
    """Hill estimator from the ``k`` largest order statistics.

    alpha_hat = [ mean_{i<=k} log(X_(i) / X_(k+1)) ]^-1 with X_(1) >= X_(2) >= ...
    """
    x = np.asarray(samples, dtype=float).ravel()
    if k < 10:
        raise ValueError(f"Hill estimator needs k >= 10, got {k}")
    if x.size < k + 1:
        raise ValueError(f"Hill estimator needs at least k+1={k + 1} samples, got {x.size}")
    if not np.all(x > 0) or not np.all(np.isfinite(x)):
        raise ValueError("Hill estimator needs finite positive samples")
    top = -np.sort(-x)[: k + 1]
    logs = np.log(top[:k] / top[k])
    mean_log = logs.mean()
    if mean_log <= 0:
        raise ValueError("degenerate tail: top order statistics are all equal")
    alpha = 1.0 / mean_log
    half = 1.96 / np.sqrt(k)
    return HillEstimate(alpha_hat=float(alpha), k=int(k), ci95=(float(alpha * (1 - half)), float(alpha * (1 + half))))


def linfit(xs, ys) -> LinFit:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("linfit expects two 1-D arrays of equal length")
    if xs.size < 3:
        raise ValueError("linfit needs at least 3 points")
    xc = xs - xs.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("linfit: all x values are equal")
    yc = ys - ys.mean()
    slope = float(xc @ yc) / sxx
    intercept = float(ys.mean() - slope * xs.mean())
    resid = ys - (intercept + slope * xs)
    ssr = float(resid @ resid)
    syy = float(yc @ yc)
    r2 = 1.0 if syy == 0.0 else 1.0 - ssr / syy
    slope_se = float(np.sqrt(ssr / (xs.size - 2) / sxx))
    return LinFit(slope=slope, intercept=intercept, r2=r2, slope_se=slope_se)


def _leave_one_out_means(x: np.ndarray) -> np.ndarray:
    return (x.sum() - x) / (x.size - 1)


def jackknife_se(replicates) -> float:
    """Standard error from leave-one-out replicates of a statistic."""
    r = np.asarray(replicates, dtype=float)
    m = r.size
    return float(np.sqrt((m - 1) / m * np.sum((r - r.mean()) ** 2)))


def summarize(samples) -> Summary:
    """Mean, unbiased variance, SE of the mean and jackknife SE of the variance."""
    x = np.asarray(samples, dtype=float).ravel()
    m = x.size
    if m < 2:
        raise ValueError("summarize needs at least 2 samples")
    mean = float(x.mean())
    xc = x - mean
    var = float(xc @ xc) / (m - 1)
    se_mean = float(np.sqrt(var / m))
    if m == 2:
        se_var = float("nan")
    else:
        # leave-one-out variances in closed form on centred data
        s1 = xc.sum()
        s2 = xc @ xc
        loo = (s2 - xc**2 - (s1 - xc) ** 2 / (m - 1)) / (m - 2)
        se_var = jackknife_se(loo)
    return Summary(mean=mean, variance=var, se_mean=se_mean, se_variance=se_var)


def second_moment(samples) -> tuple[float, float]:
    """Raw second moment E[x^2] and its standard error."""
    x2 = np.asarray(samples, dtype=float).ravel() ** 2
    m = x2.size
    se = float(x2.std(ddof=1) / np.sqrt(m)) if m > 1 else float("nan")
    return float(x2.mean()), se


def rms(samples) -> tuple[float, float]:
    """Root mean square and its jackknife standard error."""
    x2 = np.asarray(samples, dtype=float).ravel() ** 2
    value = float(np.sqrt(x2.mean()))
    if x2.size < 2:
        return value, float("nan")
    return value, jackknife_se(np.sqrt(_leave_one_out_means(x2)))
