"""Command-line interface: ``rsvol <subcommand> [options]``.

Subcommands
-----------
simulate   simulate a daily data set from a model
estimate   run the posterior sampler on a daily CSV
forecast   one-day-ahead forecast from the full sample
backtest   rolling-window forecasts plus evaluation tables
eval       recompute evaluation tables from saved forecasts
stats      descriptive statistics of the returns
realized   aggregate intraday returns into daily realized measures

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .backtest import PROXY_COLUMNS, BacktestConfig, evaluate_forecasts, run_backtest, write_outputs
from .errors import ConfigError, DataError, RsvolError
from .forecast import forecast_record, predict_one_step
from .innovations import InnovationSpec
from .io import load_daily_csv, load_intraday_csv, read_daily_frame
from .model import Dataset, ModelParams, PriorSpec, parse_model, simulate
from .realized import daily_measures
from .samplers import ChainConfig, run_chain
from .stats import descriptive_stats

log = logging.getLogger("rsvol")

DEFAULT_TRUTH = {
    "mu": 0.0, "phi": 0.97, "rho": -0.4, "sigma_eta2": 0.03, "xi": -0.2, "sigma_u2": 0.1,
    "nu": 15.0, "beta": -0.5, "delta": -0.5, "gamma": 0.8,
}


# ---------------------------------------------------------------------------
# configuration


def load_config(path) -> dict:
    """Read a YAML mapping; a missing path yields an empty config."""
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return cfg


def _section(cfg: dict, key: str) -> dict:
    val = cfg.get(key) or {}
    if not isinstance(val, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    return dict(val)


def _build(cls, values: dict, what: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {what} setting(s): {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what} settings: {exc}") from exc


def chain_config(cfg: dict, args) -> ChainConfig:
    vals = _section(cfg, "chain")
    for key in ("n_iter", "n_burn", "thin"):
        v = getattr(args, key, None)
        if v is not None:
            vals[key] = v
    if getattr(args, "seed", None) is not None:
        vals["seed"] = args.seed
    return _build(ChainConfig, vals, "chain")


def prior_spec(cfg: dict) -> PriorSpec:
    return _build(PriorSpec, _section(cfg, "prior"), "prior")


def backtest_config(cfg: dict, args) -> BacktestConfig:
    vals = {k: v for k, v in cfg.items() if k not in ("data", "out", "chain", "prior", "mcs", "proxies")}
    mcs = _section(cfg, "mcs")
    for key in ("level_vol", "level_var", "boot", "block"):
        if key in mcs:
            vals[f"mcs_{key}"] = mcs.pop(key)
    if mcs:
        raise ConfigError(f"unknown mcs setting(s): {sorted(mcs)}")
    overrides = {
        "models": args.models, "window": args.window, "n_forecasts": args.n_forecasts,
        "n_pred": args.n_pred, "alphas": args.alphas, "seed": args.seed,
    }
    vals.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_warm_start:
        vals["warm_start"] = False
    for key in ("models", "alphas"):
        if key in vals:
            vals[key] = tuple(vals[key])
    vals["chain"] = chain_config(cfg, args)
    vals["prior"] = prior_spec(cfg)
    return _build(BacktestConfig, vals, "backtest")


def _model(name: str):
    try:
        return parse_model(name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dataset_for(model, data: Dataset) -> Dataset:
    if model.use_rv and data.x is None:
        raise ConfigError(f"{model.name} needs an rv column in the data")
    return data if model.use_rv else Dataset(data.y, None, data.dates)


def _out_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model = _model(args.model)
    vals = dict(DEFAULT_TRUTH)
    vals.update(_section(cfg, "params"))
    for item in args.param or []:
        key, sep, val = item.partition("=")
        if not sep or key not in DEFAULT_TRUTH:
            raise ConfigError(f"bad --param {item!r}; expected one of {sorted(DEFAULT_TRUTH)} as key=value")
        vals[key] = float(val)
    fam = model.family
    try:
        shape = InnovationSpec(
            fam,
            nu=vals["nu"] if fam.has_nu else None,
            beta=vals["beta"] if fam.has_beta else 0.0,
            delta=vals["delta"] if fam.has_delta else 0.0,
            gamma=vals["gamma"] if fam.has_gamma else 1.0,
        )
        params = ModelParams(vals["mu"], vals["phi"], vals["rho"], vals["sigma_eta2"], vals["xi"], vals["sigma_u2"], shape)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    data, latent = simulate(params, args.n, np.random.default_rng(args.seed), with_rv=True)
    df = pd.DataFrame({"date": pd.to_datetime(data.dates).strftime("%Y-%m-%d"), "return": data.y,
                       "rv": np.exp(data.x), "h": latent.h})
    df.to_csv(args.out, index=False)
    log.info("wrote %d rows to %s", len(df), args.out)
    return 0


def _estimate(args):
    cfg = load_config(args.config)
    model = _model(args.model)
    data = _dataset_for(model, load_daily_csv(args.data))
    draws = run_chain(model, data, prior_spec(cfg), chain_config(cfg, args), rng=np.random.default_rng(args.seed))
    return model, data, draws


def _summary(draws) -> pd.DataFrame:
    rows = []
    acc = draws.acceptance
    for name, v in draws.params.items():
        lo, hi = draws.interval(name)
        rows.append({"param": name, "mean": float(v.mean()), "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
                     "q025": lo, "q975": hi, "acceptance": acc.get(name, acc.get("rho_sigma", np.nan))})
    return pd.DataFrame(rows)


def cmd_estimate(args) -> int:
    model, _, draws = _estimate(args)
    summary = _summary(draws)
    print(summary.to_string(index=False))
    if args.out:
        out = _out_dir(args.out)
        summary.to_csv(out / f"posterior_{model.name}.csv", index=False)
        pd.DataFrame(draws.params).to_csv(out / f"draws_{model.name}.csv", index=False)
        (out / f"diagnostics_{model.name}.json").write_text(json.dumps(
            {"acceptance": draws.acceptance, **draws.diagnostics}, indent=2, sort_keys=True, default=float))
    return 0


def cmd_forecast(args) -> int:
    model, data, draws = _estimate(args)
    rng = np.random.default_rng([args.seed or 0, 1])
    sample = predict_one_step(draws, rng, args.n_pred)
    nxt = np.busday_offset(np.datetime64(data.dates[-1], "D"), 1, roll="forward")
    rec = forecast_record(nxt, sample, tuple(args.alphas))
    row = rec.as_row()
    row["model"] = model.name
    print(json.dumps(row, indent=2, default=float))
    if args.out:
        Path(args.out).write_text(json.dumps(row, indent=2, default=float))
    return 0


def cmd_backtest(args) -> int:
    cfg = load_config(args.config)
    data_path = args.data or cfg.get("data")
    out = args.out or cfg.get("out")
    if not data_path or not out:
        raise ConfigError("backtest needs a data file and an output directory")
    config = backtest_config(cfg, args)
    frame = read_daily_frame(data_path)
    data = load_daily_csv(data_path)
    wanted = args.proxies or cfg.get("proxies")
    proxies = {label: frame[col].to_numpy() for col, label in PROXY_COLUMNS.items() if col in frame.columns}
    if wanted is not None:
        missing = set(wanted) - set(proxies)
        if missing:
            raise ConfigError(f"proxy column(s) not in data: {sorted(missing)}")
        proxies = {k: proxies[k] for k in wanted}
    result = run_backtest(data, config, proxies)
    result.manifest["data"] = str(data_path)
    write_outputs(result, _out_dir(out))
    print(result.tables["evaluation"].to_string(index=False))
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    src = Path(args.dir)
    files = sorted(src.glob("forecasts_*.csv"))
    if not files:
        raise DataError(f"no forecasts_*.csv files in {src}")
    forecasts = {f.stem[len("forecasts_"):]: pd.read_csv(f, float_precision="round_trip") for f in files}
    manifest = src / "manifest.json"
    if manifest.is_file():
        # keep the run's model order so recomputed tables match the originals
        run_cfg = json.loads(manifest.read_text()).get("config", {})
        order = run_cfg.get("models", [])
        forecasts = {m: forecasts[m] for m in order if m in forecasts} | {
            m: f for m, f in forecasts.items() if m not in order}
        if args.seed is None:
            args.seed = run_cfg.get("seed")
        mcs_run = {k[4:]: v for k, v in run_cfg.items() if k.startswith("mcs_")}
        cfg = {**cfg, "mcs": {**mcs_run, **_section(cfg, "mcs")}}
    cols = next(iter(forecasts.values())).columns
    alphas = sorted({float(c[4:]) for c in cols if re.fullmatch(r"var_[0-9.e-]+", c)})
    proxies = [c[len("proxy_"):] for c in cols if c.startswith("proxy_")]
    fake = argparse.Namespace(models=list(forecasts), window=None, n_forecasts=None, n_pred=None,
                              alphas=alphas, seed=args.seed, no_warm_start=False)
    config = backtest_config({k: v for k, v in cfg.items() if k in ("mcs", "seed")}, fake)
    tables = evaluate_forecasts(forecasts, alphas, proxies, config)
    out = _out_dir(args.out or src)
    for name, df in tables.items():
        df.to_csv(out / f"{name}.csv", index=False)
    print(tables["evaluation"].to_string(index=False))
    return 0


def cmd_stats(args) -> int:
    data = load_daily_csv(args.data)
    res = descriptive_stats(data.y, lags=args.lags)
    print(json.dumps(res, indent=2))
    return 0


def cmd_realized(args) -> int:
    intraday = load_intraday_csv(args.intraday)
    try:
        daily = daily_measures(intraday, tuple(args.measures), args.H)
    except (KeyError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    daily.columns = [c.lower() for c in daily.columns]
    daily.to_csv(args.out)
    log.info("wrote %d days to %s", len(daily), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def _chain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--n-iter", dest="n_iter", type=int)
    p.add_argument("--n-burn", dest="n_burn", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsvol", description="Realized stochastic volatility toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a daily data set")
    p.add_argument("--model", default="RSV-N")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    for name, func, hlp in (("estimate", cmd_estimate, "run the posterior sampler"),
                            ("forecast", cmd_forecast, "one-day-ahead forecast")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--data", required=True)
        p.add_argument("--model", required=True)
        p.add_argument("--out")
        _chain_flags(p)
        if name == "forecast":
            p.add_argument("--n-pred", dest="n_pred", type=int, default=15000)
            p.add_argument("--alphas", type=float, nargs="+", default=[0.01, 0.05])
        p.set_defaults(func=func)

    p = sub.add_parser("backtest", help="rolling-window backtest")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--models", nargs="+")
    p.add_argument("--window", type=int)
    p.add_argument("--n-forecasts", dest="n_forecasts", type=int)
    p.add_argument("--n-pred", dest="n_pred", type=int)
    p.add_argument("--alphas", type=float, nargs="+")
    p.add_argument("--proxies", nargs="+")
    p.add_argument("--no-warm-start", dest="no_warm_start", action="store_true")
    _chain_flags(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("eval", help="evaluate saved forecasts")
    p.add_argument("--dir", required=True)
    p.add_argument("--out")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="descriptive statistics of returns")
    p.add_argument("--data", required=True)
    p.add_argument("--lags", type=int, default=10)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("realized", help="daily realized measures from intraday returns")
    p.add_argument("--intraday", required=True)
    p.add_argument("--H", type=int, default=10)
    p.add_argument("--measures", nargs="+", default=["RV", "RK", "BV", "Med"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_realized)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except RsvolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
