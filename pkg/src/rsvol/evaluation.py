"""Forecast losses and predictive-ability tests for volatility and tail risk."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "DQResult",
    "GWResult",
    "LossSeries",
    "MCSResult",
    "dq_test",
    "fz0",
    "fz0_diff",
    "gw_conditional",
    "gw_unconditional",
    "mcs",
    "qlike",
    "violations",
]


# ---------------------------------------------------------------------------
# losses


def qlike(x, f):
    """QLIKE loss ``x / f - log(x / f) - 1`` of forecast ``f`` for proxy ``x``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(x <= 0.0) or np.any(f <= 0.0):
        raise ValueError("QLIKE needs positive proxies and forecasts")
    r = x / f
    out = r - np.log(r) - 1.0
    return float(out) if out.ndim == 0 else out


def fz0(y, v, e, alpha: float):
    """FZ0 joint loss of a VaR ``v`` and ES ``e`` forecast for return ``y``.

    ``-(1 / (alpha e)) 1{y <= v} (v - y) + v / e + log(-e) - 1``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(e >= 0.0):
        raise ValueError("FZ0 is defined for negative expected shortfall only")
    hit = (y <= v).astype(float)
    out = -hit * (v - y) / (alpha * e) + v / e + np.log(-e) - 1.0
    return float(out) if out.ndim == 0 else out


def fz0_diff(y, v_a, e_a, v_b, e_b, alpha: float):
    """FZ0 loss difference ``L_a - L_b`` of two VaR / ES forecasts.

    The log terms are combined as ``log(e_a / e_b)`` so that the difference is
    invariant to a joint rescaling of ``(y, v, e)`` without the rounding of
    two separate logarithms.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    y = np.asarray(y, dtype=float)
    v_a, e_a = np.asarray(v_a, dtype=float), np.asarray(e_a, dtype=float)
    v_b, e_b = np.asarray(v_b, dtype=float), np.asarray(e_b, dtype=float)
    if np.any(e_a >= 0.0) or np.any(e_b >= 0.0):
        raise ValueError("FZ0 is defined for negative expected shortfall only")
    ha = (y <= v_a).astype(float)
    hb = (y <= v_b).astype(float)
    out = (-ha * (v_a - y) / (alpha * e_a) + v_a / e_a) - (-hb * (v_b - y) / (alpha * e_b) + v_b / e_b)
    out = out + np.log(e_a / e_b)
    return float(out) if out.ndim == 0 else out


def violations(y, var) -> np.ndarray:
    """VaR violation indicators ``1{y_t < VaR_t}``."""
    return (np.asarray(y, dtype=float) < np.asarray(var, dtype=float)).astype(float)


@dataclass(frozen=True)
class LossSeries:
    """Aligned per-date losses of two models."""

    model_a: str
    model_b: str
    loss_a: np.ndarray
    loss_b: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.loss_a, dtype=float)
        b = np.asarray(self.loss_b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("loss series must be 1-d and of equal length")
        object.__setattr__(self, "loss_a", a)
        object.__setattr__(self, "loss_b", b)

    @property
    def diff(self) -> np.ndarray:
        """``L_a - L_b``; positive values favour model ``b``."""
        return self.loss_a - self.loss_b


# ---------------------------------------------------------------------------
# Giacomini-White tests


@dataclass(frozen=True)
class GWResult:
    stat: float
    pvalue: float
    degenerate: bool = False
    indicator: float = float("nan")


def _newey_west_var(d: np.ndarray, lags: int) -> float:
    u = d - d.mean()
    n = u.size
    v = u @ u / n
    for k in range(1, lags + 1):
        v += 2.0 * (1.0 - k / (lags + 1.0)) * (u[k:] @ u[:-k]) / n
    return float(v * n / (n - 1))


def gw_unconditional(diff, hac_lags: int = 0) -> GWResult:
    """Unconditional test of equal predictive ability.

    ``stat = mean(dL) / sqrt(var(dL) / n)`` with a two-sided normal p-value.
    ``hac_lags > 0`` replaces the sample variance by a Bartlett long-run variance.
    """
    d = np.asarray(diff, dtype=float).ravel()
    n = d.size
    if n < 2:
        raise ValueError("need at least two loss differences")
    var = float(np.var(d, ddof=1)) if hac_lags == 0 else _newey_west_var(d, int(hac_lags))
    if not var > 0.0:
        # constant differences: identical losses give a clean zero
        if d.mean() == 0.0:
            return GWResult(0.0, 1.0, True)
        return GWResult(float("nan"), float("nan"), True)
    stat = float(d.mean() / np.sqrt(var / n))
    return GWResult(stat, float(2.0 * stats.norm.sf(abs(stat))))


def gw_conditional(diff, rcond: float = 1e-12) -> GWResult:
    """Conditional Wald test with instruments ``(1, dL_t)`` for ``dL_{t+1}``.

    Uses the ``n - 1`` available pairs: ``Z_{t+1} = h_t dL_{t+1}``,
    ``T = m Zbar' Omega^{-1} Zbar`` with ``Omega = sum Z Z' / m``, referred
    to chi-square(2).  ``indicator`` is the share of dates where the fitted
    ``b' h_t`` is positive, i.e. where model ``b`` is predicted to win.
    """
    d = np.asarray(diff, dtype=float).ravel()
    n = d.size
    if n < 3:
        raise ValueError("need at least three loss differences")
    H = np.column_stack([np.ones(n - 1), d[:-1]])
    target = d[1:]
    Z = H * target[:, None]
    m = Z.shape[0]
    zbar = Z.mean(axis=0)
    omega = Z.T @ Z / m
    q = H.shape[1]
    if np.linalg.matrix_rank(omega, tol=rcond * max(1.0, np.abs(omega).max())) < q:
        return GWResult(float("nan"), float("nan"), True)
    stat = float(m * zbar @ np.linalg.solve(omega, zbar))
    b, *_ = np.linalg.lstsq(H, target, rcond=None)
    indicator = float(np.mean(H @ b > 0.0))
    return GWResult(stat, float(stats.chi2.sf(stat, q)), False, indicator)


# ---------------------------------------------------------------------------
# dynamic quantile test


@dataclass(frozen=True)
class DQResult:
    stat: float
    pvalue: float
    degenerate: bool = False


def dq_test(hits, var_forecasts, alpha: float) -> DQResult:
    """Dynamic quantile test of VaR violations.

    Regresses ``hit_t - alpha`` on ``(1, VaR_t, hit_{t-1})``; under correct
    unconditional and conditional coverage all coefficients vanish and
    ``DQ = b' X'X b / (alpha (1 - alpha))`` is chi-square(3).  Collinear
    regressors are handled with a pseudo-inverse and flagged.
    """
    hit = np.asarray(hits, dtype=float).ravel()
    var = np.asarray(var_forecasts, dtype=float).ravel()
    if hit.shape != var.shape:
        raise ValueError("hits and VaR forecasts must be aligned")
    if hit.size < 10:
        raise ValueError("need at least ten observations")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    X = np.column_stack([np.ones(hit.size - 1), var[1:], hit[:-1]])
    y = hit[1:] - alpha
    xtx = X.T @ X
    degenerate = bool(np.linalg.matrix_rank(X) < X.shape[1])
    b = np.linalg.pinv(xtx) @ (X.T @ y)
    stat = float(b @ xtx @ b / (alpha * (1.0 - alpha)))
    return DQResult(stat, float(stats.chi2.sf(stat, X.shape[1])), degenerate)


# ---------------------------------------------------------------------------
# model confidence set


@dataclass
class MCSResult:
    """Model confidence set output.

    ``pvalues`` are MCS p-values (non-decreasing along ``eliminated``);
    ``included`` marks models with p-value at least ``1 - level``.
    """

    names: list[str]
    pvalues: np.ndarray
    eliminated: list[str]
    level: float

    @property
    def included(self) -> np.ndarray:
        return self.pvalues >= 1.0 - self.level

    def members(self, level: float | None = None) -> list[str]:
        lvl = self.level if level is None else level
        return [n for n, p in zip(self.names, self.pvalues) if p >= 1.0 - lvl]


def _block_indices(n: int, block: int, n_boot: int, rng: np.random.Generator) -> np.ndarray:
    n_blocks = -(-n // block)
    starts = rng.integers(0, n - block + 1, size=(n_boot, n_blocks))
    idx = (starts[:, :, None] + np.arange(block)).reshape(n_boot, -1)
    return idx[:, :n]


def mcs(
    losses,
    level: float = 0.9,
    n_boot: int = 1000,
    block: int = 10,
    rng: np.random.Generator | None = None,
    names=None,
) -> MCSResult:
    """Model confidence set by T_max elimination with a moving-block bootstrap.

    Parameters
    ----------
    losses
        Array of shape ``(n_models, n_dates)``.
    level
        Confidence level; the set holds models with p-value ``>= 1 - level``.
    """
    L = np.asarray(losses, dtype=float)
    if L.ndim != 2 or L.shape[0] < 2:
        raise ValueError("need a (models x dates) loss matrix with at least two models")
    k, n = L.shape
    if n < block:
        raise ValueError(f"need at least block={block} dates, got {n}")
    rng = np.random.default_rng() if rng is None else rng
    names = [f"m{i}" for i in range(k)] if names is None else list(names)
    if len(names) != k:
        raise ValueError("names must match the number of models")

    idx = _block_indices(n, block, n_boot, rng)
    means = L.mean(axis=1)
    boot_means = np.stack([L[:, ix].mean(axis=1) for ix in idx])  # (n_boot, k)

    alive = list(range(k))
    pvals = np.ones(k)
    order: list[int] = []
    running = 0.0
    while len(alive) > 1:
        a = np.array(alive)
        dbar = means[a] - means[a].mean()
        dstar = boot_means[:, a] - boot_means[:, a].mean(axis=1, keepdims=True) - dbar
        sd = np.sqrt(np.mean(dstar**2, axis=0))
        if not np.any(sd > 0.0):
            break
        safe = np.where(sd > 0.0, sd, np.inf)
        t = dbar / safe
        tmax = t.max()
        tstar = (dstar / safe).max(axis=1)
        p = float(np.mean(tstar >= tmax))
        running = max(running, p)
        worst = int(a[np.argmax(t)])
        pvals[worst] = running
        order.append(worst)
        alive.remove(worst)
    return MCSResult(names, pvals, [names[i] for i in order], level)
