import json

import numpy as np
import pandas as pd
import pytest

from rsvol.backtest import BacktestConfig, evaluate_forecasts, run_backtest, write_outputs
from rsvol.cli import main
from rsvol.errors import ConfigError
from rsvol.model import ModelParams, simulate
from rsvol.samplers import ChainConfig

FAST = ["--n-iter", "200", "--n-burn", "100", "--seed", "3"]


@pytest.fixture(scope="module")
def data():
    d, _ = simulate(ModelParams(0.0, 0.95, -0.4, 0.05, -0.2, 0.1), 80, np.random.default_rng(0))
    return d


def _cfg(**kw):
    base = dict(models=("SV-N", "RSV-N"), window=60, n_pred=1000, chain=ChainConfig(200, 100),
                alphas=(0.05, 0.1), mcs_boot=100, seed=1)
    base.update(kw)
    return BacktestConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(window=5)
    with pytest.raises(ConfigError):
        _cfg(n_pred=10)
    assert _cfg().digest() == _cfg().digest() != _cfg(seed=2).digest()


def test_single_forecast_per_model(data):
    res = run_backtest(data, _cfg(window=len(data) - 1))
    for f in res.forecasts.values():
        assert len(f) == 1
    assert res.manifest["n_forecasts"] == 1


def test_window_too_long(data):
    with pytest.raises(ConfigError):
        run_backtest(data, _cfg(window=len(data)))


def test_backtest_deterministic_and_tables(data, tmp_path):
    a = run_backtest(data, _cfg())
    b = run_backtest(data, _cfg())
    for m in a.forecasts:
        pd.testing.assert_frame_equal(a.forecasts[m], b.forecasts[m])
    f = a.forecasts["RSV-N"]
    assert len(f) == 20
    assert np.all(f["es_0.05"] <= f["var_0.05"])
    assert set(a.tables) >= {"evaluation", "gw_matrix", "mcs", "losses_SV-N__RSV-N"}
    ev = a.tables["evaluation"].set_index("model")
    assert {"mean_qlike_RV", "mean_fz0_0.05", "viol_rate_0.1", "dq_pvalue_0.05"} <= set(ev.columns)
    paths = write_outputs(a, tmp_path)
    names = {p.name for p in paths}
    assert {"forecasts_SV-N.csv", "forecasts_RSV-N.csv", "manifest.json", "gw_matrix.csv"} <= names
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 1 and man["config_hash"] == _cfg().digest()


def test_fz0_pair_difference_matches_losses(data):
    res = run_backtest(data, _cfg())
    pl = res.tables["losses_SV-N__RSV-N"]
    sub = pl[pl["loss"] == "fz0_0.05"]
    np.testing.assert_allclose(sub["diff"], sub["loss_a"] - sub["loss_b"], atol=1e-12)


def test_evaluate_is_pure(data):
    res = run_backtest(data, _cfg())
    again = evaluate_forecasts(res.forecasts, (0.05, 0.1), ["RV"], _cfg())
    for k in res.tables:
        pd.testing.assert_frame_equal(res.tables[k], again[k])


# -- command line -----------------------------------------------------------------


@pytest.fixture(scope="module")
def csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("data") / "sim.csv"
    assert main(["simulate", "--model", "RSV-N", "--n", "90", "--seed", "4", "--out", str(d)]) == 0
    return d


def test_simulate_output(csv):
    df = pd.read_csv(csv)
    assert list(df.columns) == ["date", "return", "rv", "h"]
    assert len(df) == 90 and (df["rv"] > 0).all()


def test_cli_estimate(csv, tmp_path, capsys):
    assert main(["estimate", "--data", str(csv), "--model", "RSV-T", "--out", str(tmp_path)] + FAST) == 0
    post = pd.read_csv(tmp_path / "posterior_RSV-T.csv")
    assert "nu" in set(post.iloc[:, 0])


def test_cli_forecast(csv, capsys):
    assert main(["forecast", "--data", str(csv), "--model", "SV-N", "--n-pred", "1000"] + FAST) == 0
    assert "var_0.01" in capsys.readouterr().out


def test_cli_stats(csv, capsys):
    assert main(["stats", "--data", str(csv)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n"] == 90 and "lb_robust_pvalue" in out


def test_cli_backtest_and_eval_roundtrip(csv, tmp_path):
    out = tmp_path / "bt"
    args = ["backtest", "--data", str(csv), "--out", str(out), "--models", "SV-N", "RSV-N", "--window", "75",
            "--n-pred", "1000", "--alphas", "0.05", "0.1"] + FAST
    assert main(args) == 0
    before = {p.name: p.read_text() for p in out.glob("*.csv") if not p.name.startswith("forecasts_")}
    again = tmp_path / "ev"
    assert main(["eval", "--dir", str(out), "--out", str(again)]) == 0
    for name, text in before.items():
        assert (again / name).read_text() == text, name


def test_cli_realized(tmp_path):
    rng = np.random.default_rng(0)
    intraday = pd.DataFrame({"date": np.repeat(["2020-01-02", "2020-01-03"], 50),
                             "return": 0.001 * rng.standard_normal(100)})
    src = tmp_path / "intra.csv"
    intraday.to_csv(src, index=False)
    dst = tmp_path / "daily.csv"
    assert main(["realized", "--intraday", str(src), "--H", "5", "--out", str(dst)]) == 0
    daily = pd.read_csv(dst)
    assert list(daily.columns) == ["date", "rv", "rk", "bv", "med"] and len(daily) == 2


def test_exit_codes(csv, tmp_path):
    returns_only = tmp_path / "r.csv"
    pd.read_csv(csv)[["date", "return"]].to_csv(returns_only, index=False)
    bad_rv = tmp_path / "bad.csv"
    df = pd.read_csv(csv)
    df.loc[5, "rv"] = 0.0
    df.to_csv(bad_rv, index=False)
    assert main(["estimate", "--data", str(csv), "--model", "GARCH-N"] + FAST) == 2
    assert main(["estimate", "--data", str(returns_only), "--model", "RSV-N"] + FAST) == 2
    assert main(["estimate", "--data", str(bad_rv), "--model", "RSV-N"] + FAST) == 3
    assert main(["stats", "--data", str(tmp_path / "missing.csv")]) == 3
    cfg = tmp_path / "c.yaml"
    cfg.write_text("chain:\n  n_iter: 100\n  bogus: 1\n")
    assert main(["estimate", "--data", str(csv), "--model", "SV-N", "--config", str(cfg)]) == 2
    assert main(["eval", "--dir", str(tmp_path / "empty")]) == 3
