"""One-day-ahead predictive simulation and VaR / ES extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .innovations import Family, draw_standardized
from .samplers.common import PosteriorDraws

__all__ = [
    "ForecastRecord",
    "PredictiveSample",
    "forecast_record",
    "predict_from_arrays",
    "predict_one_step",
    "var_es",
]


@dataclass(frozen=True)
class PredictiveSample:
    """Joint predictive draws of ``h_{n+1}`` and ``y_{n+1}``."""

    h: np.ndarray
    y: np.ndarray

    @property
    def vol(self) -> np.ndarray:
        return np.exp(self.h)


def predict_from_arrays(
    family: Family,
    params: dict[str, np.ndarray],
    h_last: np.ndarray,
    lev_last: np.ndarray,
    rng: np.random.Generator,
) -> PredictiveSample:
    """Simulate one step ahead for each parameter draw.

    ``h_{n+1} ~ N(mu + phi (h_n - mu) + rho sigma_eta v_n, (1 - rho^2) sigma_eta2)``
    with ``v_n`` the leverage variate of the model, then
    ``y_{n+1} = eps_{n+1} exp(h_{n+1} / 2)`` with a fresh shock.
    """
    fam = Family(family)
    mu = np.asarray(params["mu"], dtype=float)
    phi = np.asarray(params["phi"], dtype=float)
    rho = np.asarray(params["rho"], dtype=float)
    sig = np.sqrt(np.asarray(params["sigma_eta2"], dtype=float))
    m = mu.size
    mean = mu + phi * (h_last - mu) + rho * sig * lev_last
    h = mean + np.sqrt(1.0 - rho**2) * sig * rng.standard_normal(m)
    shape = {k: params[k] for k in fam.shape_names}
    eps = draw_standardized(fam, rng, m, **shape).eps
    return PredictiveSample(h=h, y=eps * np.exp(0.5 * h))


def predict_one_step(
    draws: PosteriorDraws,
    rng: np.random.Generator,
    n_samples: int | None = None,
) -> PredictiveSample:
    """Predictive sample from posterior draws.

    Parameters
    ----------
    n_samples
        Number of predictive draws. ``None`` uses each posterior draw once;
        otherwise posterior draws are resampled uniformly with replacement.
    """
    if len(draws) < 1:
        raise ValueError("need at least one posterior draw")
    if n_samples is None:
        idx = slice(None)
    else:
        idx = rng.integers(0, len(draws), n_samples)
    params = {k: v[idx] for k, v in draws.params.items()}
    return predict_from_arrays(draws.model.family, params, draws.h_last[idx], draws.lev_last[idx], rng)


def var_es(samples, alpha: float) -> tuple[float, float]:
    """Lower-tail VaR and ES from predictive return samples.

    VaR is the ``k``-th smallest sample with ``k = ceil(alpha * M)`` and ES is
    the mean of the ``k`` smallest samples.
    """
    x = np.asarray(samples, dtype=float).ravel()
    m = x.size
    if m == 0:
        raise ValueError("empty sample set")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    k = max(1, math.ceil(alpha * m - 1e-9))
    low = np.partition(x, k - 1)[:k]
    var = float(low.max())
    es = float(low.mean())
    return var, min(es, var)


@dataclass
class ForecastRecord:
    """Point and tail forecasts for one date plus the realized outcomes."""

    date: object
    vol_mean: float
    vol_median: float
    var: dict[float, float] = field(default_factory=dict)
    es: dict[float, float] = field(default_factory=dict)
    realized_return: float = float("nan")
    realized_proxy: dict[str, float] = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {"date": str(self.date), "vol_mean": self.vol_mean, "vol_median": self.vol_median}
        for a in sorted(self.var):
            row[f"var_{a:g}"] = self.var[a]
            row[f"es_{a:g}"] = self.es[a]
        row["realized_return"] = self.realized_return
        for k, v in self.realized_proxy.items():
            row[f"proxy_{k}"] = v
        return row


def forecast_record(
    date,
    sample: PredictiveSample,
    alphas=(0.01, 0.05),
    realized_return: float = float("nan"),
    realized_proxy: dict[str, float] | None = None,
) -> ForecastRecord:
    """Summarize a predictive sample into a :class:`ForecastRecord`."""
    vol = sample.vol
    rec = ForecastRecord(
        date=date,
        vol_mean=float(np.mean(vol)),
        vol_median=float(np.median(vol)),
        realized_return=float(realized_return),
        realized_proxy=dict(realized_proxy or {}),
    )
    for a in alphas:
        v, e = var_es(sample.y, a)
        rec.var[a] = v
        rec.es[a] = e
    return rec
