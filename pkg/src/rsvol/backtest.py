"""Rolling-window out-of-sample forecasting and forecast evaluation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
import zlib
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .errors import ConfigError, DataError, NumericalError
from .evaluation import dq_test, fz0, fz0_diff, gw_conditional, gw_unconditional, mcs, qlike, violations
from .forecast import forecast_record, predict_one_step
from .model import Dataset, ModelSpec, PriorSpec, parse_model
from .realized import hl_factor
from .samplers import ChainConfig, run_chain

__all__ = [
    "PROXY_COLUMNS",
    "BacktestConfig",
    "BacktestResult",
    "evaluate_forecasts",
    "run_backtest",
    "write_outputs",
]

# daily CSV column -> proxy label
PROXY_COLUMNS = {"rv": "RV", "rk": "RK", "bv": "BV", "med": "Med"}


@dataclass(frozen=True)
class BacktestConfig:
    """Settings of a rolling-window backtest.

    ``n_forecasts`` limits the run to the last forecasts of the series
    (``None`` forecasts every date after the first window).  ``warm_start``
    starts each window at the previous posterior means with half the burn-in.
    """

    models: tuple[str, ...] = ("RSV-N", "SV-N")
    window: int = 1000
    alphas: tuple[float, ...] = (0.01, 0.05)
    n_pred: int = 15000
    chain: ChainConfig = field(default_factory=lambda: ChainConfig(n_iter=6000, n_burn=2000))
    prior: PriorSpec = field(default_factory=PriorSpec)
    n_forecasts: int | None = None
    warm_start: bool = True
    seed: int = 0
    mcs_level_vol: float = 0.9
    mcs_level_var: float = 0.75
    mcs_boot: int = 1000
    mcs_block: int = 10

    def __post_init__(self) -> None:
        if not self.models:
            raise ConfigError("at least one model is required")
        for m in self.models:
            try:
                parse_model(m)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        if self.window < 20:
            raise ConfigError("window must be at least 20")
        if self.n_pred < 1000:
            raise ConfigError("need at least 1000 predictive samples")
        if not all(0.0 < a < 0.5 for a in self.alphas):
            raise ConfigError("VaR levels must lie in (0, 0.5)")
        if self.n_forecasts is not None and self.n_forecasts < 1:
            raise ConfigError("n_forecasts must be positive")

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["models"] = list(self.models)
        d["alphas"] = list(self.alphas)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class BacktestResult:
    forecasts: dict[str, pd.DataFrame]
    tables: dict[str, pd.DataFrame]
    manifest: dict = field(default_factory=dict)


def _stream(seed: int, model: str, t: int) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(model.encode()), t])


def _warm_init(prev, model: ModelSpec, shift: int) -> dict:
    d = prev.mean()
    h = prev.h_mean
    if shift > 0:
        h = np.concatenate([h[shift:], np.repeat(h[-1], shift)])
    d["h"] = h
    if model.family.has_nu:
        d["nu"] = max(d["nu"], model.family.nu_floor + 0.5)
    return d


def _forecast_model(name: str, data: Dataset, proxies: dict[str, np.ndarray], start: int,
                    cfg: BacktestConfig) -> pd.DataFrame:
    model = parse_model(name)
    if model.use_rv and data.x is None:
        raise ConfigError(f"{name} needs a realized measure (rv column)")
    rows = []
    prev = None
    prev_t = None
    for t in range(start, len(data)):
        win = data.window(t - cfg.window, t)
        rng = _stream(cfg.seed, name, t)
        chain = cfg.chain
        init = None
        if cfg.warm_start and prev is not None:
            init = _warm_init(prev, model, t - prev_t)
            chain = dataclasses.replace(chain, n_burn=chain.n_burn // 2)
        realized = {}
        for label, series in proxies.items():
            c = hl_factor(series[t - cfg.window:t], data.y[t - cfg.window:t])
            realized[label] = c * series[t]
        try:
            draws = run_chain(model, win if model.use_rv else Dataset(win.y, None, win.dates),
                              cfg.prior, chain, init=init, rng=rng)
            sample = predict_one_step(draws, rng, cfg.n_pred)
            rec = forecast_record(data.dates[t], sample, cfg.alphas, data.y[t], realized)
            row = rec.as_row()
            row["flagged"] = False
            prev, prev_t = draws, t
        except NumericalError:
            row = {"date": str(data.dates[t]), "vol_mean": np.nan, "vol_median": np.nan}
            for a in cfg.alphas:
                row[f"var_{a:g}"] = np.nan
                row[f"es_{a:g}"] = np.nan
            row["realized_return"] = data.y[t]
            for label, v in realized.items():
                row[f"proxy_{label}"] = v
            row["flagged"] = True
            prev = None
        rows.append(row)
    return pd.DataFrame(rows)


def run_backtest(data: Dataset, config: BacktestConfig, proxies: dict[str, np.ndarray] | None = None) -> BacktestResult:
    """Re-estimate every model on a trailing window and forecast the next day.

    Parameters
    ----------
    proxies
        Label -> daily volatility proxy aligned with ``data``.  Defaults to
        ``{"RV": exp(x)}`` when a realized measure is present.  Each proxy is
        rescaled on the trailing window before it is used for evaluation.
    """
    n = len(data)
    if config.window >= n:
        raise ConfigError(f"window {config.window} must be shorter than the series ({n})")
    if proxies is None:
        proxies = {} if data.x is None else {"RV": np.exp(data.x)}
    for label, series in proxies.items():
        if np.shape(series) != (n,) or np.any(np.asarray(series) <= 0.0):
            raise DataError(f"proxy {label} must be positive and aligned with the returns")
    start = config.window if config.n_forecasts is None else max(config.window, n - config.n_forecasts)
    t0 = time.perf_counter()
    forecasts = {m: _forecast_model(m, data, proxies, start, config) for m in config.models}
    tables = evaluate_forecasts(forecasts, config.alphas, list(proxies), config)
    manifest = {
        "version": __version__,
        "seed": config.seed,
        "config_hash": config.digest(),
        "config": config.as_dict(),
        "n_obs": n,
        "n_forecasts": n - start,
        "flagged": {m: int(f["flagged"].sum()) for m, f in forecasts.items()},
        "wall_seconds": round(time.perf_counter() - t0, 3),
    }
    return BacktestResult(forecasts, tables, manifest)


# ---------------------------------------------------------------------------
# evaluation from persisted forecasts


def _loss_frame(df: pd.DataFrame, alphas, proxies) -> pd.DataFrame:
    """Per-date losses of one model; NaN on flagged dates."""
    ok = ~df["flagged"].astype(bool).to_numpy()
    out = pd.DataFrame({"date": df["date"]})
    for p in proxies:
        v = np.full(len(df), np.nan)
        v[ok] = qlike(df[f"proxy_{p}"].to_numpy()[ok], df["vol_median"].to_numpy()[ok])
        out[f"qlike_{p}"] = v
    y = df["realized_return"].to_numpy()
    for a in alphas:
        v = np.full(len(df), np.nan)
        var = df[f"var_{a:g}"].to_numpy()
        es = df[f"es_{a:g}"].to_numpy()
        good = ok & (es < 0.0)
        v[good] = fz0(y[good], var[good], es[good], a)
        out[f"fz0_{a:g}"] = v
    return out


def evaluate_forecasts(forecasts: dict[str, pd.DataFrame], alphas, proxies, config: BacktestConfig | None = None):
    """Loss, GW, MCS and VaR backtest tables computed from forecast frames only."""
    cfg = BacktestConfig(models=tuple(forecasts)) if config is None else config
    names = list(forecasts)
    losses = {m: _loss_frame(f, alphas, proxies) for m, f in forecasts.items()}
    loss_cols = [f"qlike_{p}" for p in proxies] + [f"fz0_{a:g}" for a in alphas]

    summary = []
    for m, f in forecasts.items():
        row = {"model": m, "n": int(len(f)), "flagged": int(f["flagged"].sum())}
        for c in loss_cols:
            row[f"mean_{c}"] = float(np.nanmean(losses[m][c])) if losses[m][c].notna().any() else np.nan
        ok = ~f["flagged"].astype(bool).to_numpy()
        for a in alphas:
            hits = violations(f["realized_return"].to_numpy()[ok], f[f"var_{a:g}"].to_numpy()[ok])
            row[f"viol_rate_{a:g}"] = float(hits.mean()) if hits.size else np.nan
            row[f"dq_pvalue_{a:g}"] = (dq_test(hits, f[f"var_{a:g}"].to_numpy()[ok], a).pvalue
                                       if hits.size >= 10 else np.nan)
        summary.append(row)

    pair_losses = {}
    gw_rows = []
    for a_name, b_name in combinations(names, 2):
        parts = []
        for c in loss_cols:
            la = losses[a_name][c].to_numpy()
            lb = losses[b_name][c].to_numpy()
            good = np.isfinite(la) & np.isfinite(lb)
            if c.startswith("fz0_"):
                a = alphas[loss_cols.index(c) - len(proxies)]
                fa, fb = forecasts[a_name], forecasts[b_name]
                d = fz0_diff(fa["realized_return"].to_numpy()[good],
                             fa[f"var_{a:g}"].to_numpy()[good], fa[f"es_{a:g}"].to_numpy()[good],
                             fb[f"var_{a:g}"].to_numpy()[good], fb[f"es_{a:g}"].to_numpy()[good], a)
                d = np.atleast_1d(d)
            else:
                d = la[good] - lb[good]
            parts.append(pd.DataFrame({"date": losses[a_name]["date"][good], "loss": c,
                                       "loss_a": la[good], "loss_b": lb[good], "diff": d}))
            row = {"loss": c, "model_a": a_name, "model_b": b_name, "n": int(d.size)}
            if d.size >= 3:
                u = gw_unconditional(d)
                cnd = gw_conditional(d)
                row.update(gw_stat=u.stat, gw_pvalue=u.pvalue, gwc_stat=cnd.stat, gwc_pvalue=cnd.pvalue,
                           gwc_indicator=cnd.indicator, degenerate=u.degenerate or cnd.degenerate)
            gw_rows.append(row)
        pair_losses[(a_name, b_name)] = pd.concat(parts, ignore_index=True)

    mcs_rows = []
    if len(names) >= 2:
        rng = np.random.default_rng([cfg.seed, 7])
        for c in loss_cols:
            mat = np.stack([losses[m][c].to_numpy() for m in names])
            good = np.all(np.isfinite(mat), axis=0)
            if good.sum() < cfg.mcs_block:
                continue
            level = cfg.mcs_level_vol if c.startswith("qlike") else cfg.mcs_level_var
            res = mcs(mat[:, good], level, cfg.mcs_boot, cfg.mcs_block, rng, names)
            for m, p, inc in zip(names, res.pvalues, res.included):
                mcs_rows.append({"loss": c, "model": m, "pvalue": float(p), "included": bool(inc), "level": level})

    tables = {
        "evaluation": pd.DataFrame(summary),
        "gw_matrix": pd.DataFrame(gw_rows),
        "mcs": pd.DataFrame(mcs_rows),
    }
    tables.update({f"losses_{a}__{b}": df for (a, b), df in pair_losses.items()})
    return tables


def write_outputs(result: BacktestResult, out_dir) -> list[Path]:
    """Persist forecasts, evaluation tables and the run manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for m, df in result.forecasts.items():
        p = out / f"forecasts_{m}.csv"
        df.to_csv(p, index=False)
        written.append(p)
    for name, df in result.tables.items():
        p = out / f"{name}.csv"
        df.to_csv(p, index=False)
        written.append(p)
    if result.manifest:
        p = out / "manifest.json"
        p.write_text(json.dumps(result.manifest, indent=2, sort_keys=True, default=str))
        written.append(p)
    return written
