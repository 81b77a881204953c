"""Descriptive statistics of a daily return series."""

from __future__ import annotations

import numpy as np
from scipy import stats

from .errors import DataError

__all__ = ["descriptive_stats", "ljung_box"]


def ljung_box(y, lags: int = 10, robust: bool = False) -> tuple[float, float]:
    """Ljung-Box statistic on the autocorrelations of ``y`` and its chi-square p-value.

    ``robust=True`` scales each squared autocorrelation by
    ``1 + gamma_{y^2}(k) / sigma^4`` so the test stays valid under conditional
    heteroskedasticity.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if lags < 1 or lags >= n:
        raise ValueError("lags must lie in [1, n)")
    u = y - y.mean()
    g0 = u @ u / n
    s2 = u**2 - g0
    q = 0.0
    for k in range(1, lags + 1):
        rho = (u[k:] @ u[:-k]) / n / g0
        adj = 1.0
        if robust:
            adj = 1.0 + (s2[k:] @ s2[:-k]) / n / g0**2
        q += rho**2 / ((n - k) * adj)
    q *= n * (n + 2)
    return float(q), float(stats.chi2.sf(q, lags))


def descriptive_stats(y, lags: int = 10) -> dict[str, float]:
    """Mean, SD, skewness, kurtosis, range, Jarque-Bera and Ljung-Box summaries.

    Kurtosis is the raw (non-excess) fourth standardized moment.  ``lb`` is the
    plain Ljung-Box test; ``lb_robust`` is its heteroskedasticity-adjusted form.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 8:
        raise DataError("need at least 8 observations")
    if not np.all(np.isfinite(y)):
        raise DataError("series contains non-finite values")
    if np.ptp(y) == 0.0:
        raise DataError("series is constant")
    jb = stats.jarque_bera(y)
    lags = min(lags, y.size - 1)
    lb, lb_p = ljung_box(y, lags)
    lbr, lbr_p = ljung_box(y, lags, robust=True)
    return {
        "n": int(y.size),
        "mean": float(y.mean()),
        "sd": float(y.std(ddof=1)),
        "skew": float(stats.skew(y)),
        "kurt": float(stats.kurtosis(y, fisher=False)),
        "min": float(y.min()),
        "max": float(y.max()),
        "jb": float(jb.statistic),
        "jb_pvalue": float(jb.pvalue),
        "lb": lb,
        "lb_pvalue": lb_p,
        "lb_robust": lbr,
        "lb_robust_pvalue": lbr_p,
    }
