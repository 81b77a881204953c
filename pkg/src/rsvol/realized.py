"""Daily realized volatility proxies built from intraday returns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

__all__ = [
    "IntradayDay",
    "MEASURES",
    "bipower",
    "daily_measures",
    "hl_adjust",
    "hl_factor",
    "med_rv",
    "realized_kernel",
    "realized_variance",
    "simulate_noisy_day",
    "tukey_hanning2",
]


@dataclass(frozen=True)
class IntradayDay:
    """Ordered intraday log returns of one trading day."""

    returns: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.returns, dtype=float).ravel()
        if r.size < 1:
            raise ValueError("a trading day needs at least one return")
        if not np.all(np.isfinite(r)):
            raise ValueError("intraday returns must be finite")
        object.__setattr__(self, "returns", r)

    @property
    def m(self) -> int:
        return self.returns.size


def _returns(day) -> np.ndarray:
    return day.returns if isinstance(day, IntradayDay) else IntradayDay(day).returns


def realized_variance(day) -> float:
    """Sum of squared intraday returns."""
    r = _returns(day)
    return float(r @ r)


def tukey_hanning2(x):
    """Tukey-Hanning_2 weight ``sin^2((pi / 2) (1 - x)^2)`` on ``[0, 1]``."""
    x = np.asarray(x, dtype=float)
    return np.sin(0.5 * np.pi * (1.0 - x) ** 2) ** 2


def realized_kernel(day, H: int) -> float:
    """Realized kernel with Tukey-Hanning_2 weights and bandwidth ``H``.

    ``RK = gamma_0 + 2 sum_{h=1}^{H} k(h / (H + 1)) gamma_h`` where
    ``gamma_h = sum_i r_i r_{i-h}`` is computed within the day.
    """
    r = _returns(day)
    m = r.size
    H = int(H)
    if H < 0:
        raise ValueError("bandwidth must be non-negative")
    if H >= m:
        raise ValueError(f"bandwidth H={H} must be smaller than the number of returns m={m}")
    total = float(r @ r)
    if H == 0:
        return total
    w = tukey_hanning2(np.arange(1, H + 1) / (H + 1.0))
    gam = np.array([r[h:] @ r[:-h] for h in range(1, H + 1)])
    return total + 2.0 * float(w @ gam)


def bipower(day) -> float:
    """Bipower variation ``(pi / 2) m / (m - 1) sum |r_i| |r_{i-1}|``."""
    a = np.abs(_returns(day))
    m = a.size
    if m < 2:
        raise ValueError("bipower variation needs at least two returns")
    return float(0.5 * np.pi * m / (m - 1) * np.sum(a[1:] * a[:-1]))


def med_rv(day) -> float:
    """Median realized variance from the medians of adjacent absolute-return triples."""
    a = np.abs(_returns(day))
    m = a.size
    if m < 3:
        raise ValueError("MedRV needs at least three returns")
    med = np.median(np.stack([a[:-2], a[1:-1], a[2:]]), axis=0)
    c = np.pi / (6.0 - 4.0 * np.sqrt(3.0) + np.pi)
    return float(c * m / (m - 2) * np.sum(med**2))


MEASURES = {"RV": realized_variance, "RK": realized_kernel, "BV": bipower, "Med": med_rv}


def hl_factor(proxy, y) -> float:
    """Scaling ``c = sum (y - ybar)^2 / sum proxy`` over a window."""
    proxy = np.asarray(proxy, dtype=float)
    y = np.asarray(y, dtype=float)
    if proxy.shape != y.shape:
        raise ValueError("proxy and returns must have equal length")
    denom = proxy.sum()
    if not denom > 0.0:
        raise ValueError("proxy sum must be positive")
    return float(np.sum((y - y.mean()) ** 2) / denom)


def hl_adjust(proxy, y) -> tuple[np.ndarray, float]:
    """Scale a proxy so its window mean equals the window variance of returns.

    Returns
    -------
    (adjusted, c)
    """
    c = hl_factor(proxy, y)
    return c * np.asarray(proxy, dtype=float), c


def daily_measures(intraday: pd.DataFrame, measures=("RV", "RK", "BV", "Med"), H: int = 10) -> pd.DataFrame:
    """Aggregate an intraday frame with columns ``date, return`` into daily proxies."""
    if not {"date", "return"}.issubset(intraday.columns):
        raise ValueError("intraday data needs 'date' and 'return' columns")
    rows = {}
    for date, grp in intraday.groupby("date", sort=True):
        day = IntradayDay(grp["return"].to_numpy())
        row = {}
        for name in measures:
            fn = MEASURES[name]
            row[name] = fn(day, min(H, day.m - 1)) if name == "RK" else fn(day)
        rows[date] = row
    out = pd.DataFrame.from_dict(rows, orient="index")
    out.index.name = "date"
    return out


def simulate_noisy_day(rng: np.random.Generator, m: int = 780, iv: float = 1.0, omega2: float = 0.001):
    """Intraday returns of a constant-volatility price observed with i.i.d. noise.

    The efficient log price has integrated variance ``iv``; observed prices add
    ``N(0, omega2)`` noise, which makes observed returns MA(1).
    """
    eff = np.sqrt(iv / m) * rng.standard_normal(m)
    noise = np.sqrt(omega2) * rng.standard_normal(m + 1)
    return eff + np.diff(noise)
