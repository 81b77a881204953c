"""Reading daily and intraday CSV files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError
from .model import Dataset

__all__ = ["load_daily_csv", "load_intraday_csv", "read_daily_frame"]


def read_daily_frame(path) -> pd.DataFrame:
    """Validated daily frame with columns ``date, return`` and optional ``rv``."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    try:
        df = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    df.columns = [str(c).strip().lower() for c in df.columns]
    missing = {"date", "return"} - set(df.columns)
    if missing:
        raise DataError(f"{path}: missing column(s) {sorted(missing)}")
    if df.empty:
        raise DataError(f"{path}: no rows")
    try:
        df["date"] = pd.to_datetime(df["date"])
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: unparseable date column: {exc}") from exc
    dup = df["date"][df["date"].duplicated()]
    if not dup.empty:
        raise DataError(f"{path}: duplicate date {dup.iloc[0].date()}")
    df = df.sort_values("date").reset_index(drop=True)
    cols = ["return"] + (["rv"] if "rv" in df.columns else [])
    for c in cols:
        vals = pd.to_numeric(df[c], errors="coerce")
        bad = ~np.isfinite(vals.to_numpy(dtype=float))
        if bad.any():
            raise DataError(f"{path}: missing or non-numeric {c} on {df['date'][bad].iloc[0].date()}")
        df[c] = vals.astype(float)
    if "rv" in df.columns:
        bad = df["rv"] <= 0.0
        if bad.any():
            raise DataError(f"{path}: nonpositive rv on {df['date'][bad].iloc[0].date()}")
    return df


def load_daily_csv(path) -> Dataset:
    """Load ``date, return[, rv]`` into a :class:`Dataset` with ``x = log rv``."""
    df = read_daily_frame(path)
    x = np.log(df["rv"].to_numpy()) if "rv" in df.columns else None
    return Dataset(df["return"].to_numpy(), x, df["date"].to_numpy().astype("datetime64[D]"))


def load_intraday_csv(path) -> pd.DataFrame:
    """Load ``date, return`` intraday rows, keeping file order within each day."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    df = pd.read_csv(path)
    df.columns = [str(c).strip().lower() for c in df.columns]
    missing = {"date", "return"} - set(df.columns)
    if missing:
        raise DataError(f"{path}: missing column(s) {sorted(missing)}")
    df["date"] = pd.to_datetime(df["date"]).dt.strftime("%Y-%m-%d")
    df["return"] = pd.to_numeric(df["return"], errors="coerce")
    if df["return"].isna().any():
        raise DataError(f"{path}: missing or non-numeric intraday return")
    return df
