import io
import json
import logging
import os
import pathlib
import tempfile
from typing import Optional

import pandas as pd


def atomic_write(filename: str, data: bytes):
    """Write data into file atomically, first to a temp file and then replace original file with temp file."""
    fp = None
    try:
        with tempfile.NamedTemporaryFile(dir=pathlib.Path(filename).parent, delete=False) as fp:
            fp.write(data)
        os.chmod(fp.name, 0o644)
        os.replace(fp.name, filename)
    finally:
        if fp is not None:
            try:
                os.unlink(fp.name)
            except OSError:
                pass


def dataframe_to_csv(df: pd.DataFrame) -> str:
    """CSV text with header, '.' decimals and shortest round-trip float formatting"""
    buffer = io.StringIO()
    df.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def save_dataframe(df: pd.DataFrame, filename: Optional[str]) -> str:
    """Save the DataFrame as CSV. Without a filename the CSV text is only returned."""
    text = dataframe_to_csv(df)
    if filename:
        atomic_write(filename, text.encode("utf-8"))
        logging.info(f"{len(df)} rows saved to {filename}")
    return text


def save_json(obj, filename: str):
    atomic_write(filename, json.dumps(obj, indent=2, sort_keys=True).encode("utf-8"))
    logging.info(f"Saved {filename}")
