# utils/results_store.py
"""DuckDB tables `fer_results` and `failure_log`, keyed by decoder and config hash."""
from __future__ import annotations

import logging
from pathlib import Path

import duckdb
import pandas as pd

logger = logging.getLogger(__name__)


def _replace_rows(con, table: str, df: pd.DataFrame, decoder: str, config_hash: str) -> None:
    exists = con.execute(
        "SELECT COUNT(*) FROM information_schema.tables WHERE table_name = ?", [table]
    ).fetchone()[0]
    if exists:
        con.execute(f"DELETE FROM {table} WHERE decoder = ? AND config_hash = ?", [decoder, config_hash])
    if df.empty:
        return
    con.register("incoming_df", df)
    if exists:
        con.execute(f"INSERT INTO {table} SELECT * FROM incoming_df")
    else:
        con.execute(f"CREATE TABLE {table} AS SELECT * FROM incoming_df")
    con.unregister("incoming_df")


def store_sweep(db_path: str | Path, decoder: str, config_hash: str, rows: pd.DataFrame, failures: pd.DataFrame) -> None:
    """Append one decoder's sweep; an earlier sweep with the same decoder and config is replaced."""
    db_path = Path(db_path)
    db_path.parent.mkdir(parents=True, exist_ok=True)
    rows = rows.assign(decoder=decoder, config_hash=config_hash)
    failures = failures.assign(decoder=decoder, config_hash=config_hash)
    rows["mean_rule_index"] = rows["mean_rule_index"].astype("float64")
    con = duckdb.connect(str(db_path))
    try:
        _replace_rows(con, "fer_results", rows, decoder, config_hash)
        _replace_rows(con, "failure_log", failures, decoder, config_hash)
    finally:
        con.close()
    logger.info("💾 %s results saved to DuckDB: %s", decoder, db_path)


def load_results(db_path: str | Path, table: str = "fer_results") -> pd.DataFrame:
    con = duckdb.connect(str(db_path), read_only=True)
    try:
        return con.execute(f"SELECT * FROM {table} ORDER BY decoder, alpha").df()
    finally:
        con.close()
