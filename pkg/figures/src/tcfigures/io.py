"""CSV loading with schema validation.

Every loader checks the header against the schema of the emitting
tunnelclock writer and fails with the full expected header, so a wrong
or truncated input is caught before matplotlib ever sees it.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = ["SchemaError", "load_columns", "SCHEMAS"]

# emitting module -> header (kept in sync with the tunnelclock writers)
SCHEMAS = {
    "calibration": ("t", "f_t"),
    "times": ("e0", "gamma", "z", "T", "R", "tau_d_prime", "tau_tilde_d",
              "tau_tilde_t", "tau_tilde_r", "tau_d", "tau_t", "tau_r",
              "tau_k", "tau_tsub", "tau_t_v"),
    "detector": ("t", "d_in", "d_exit", "p_in", "p_exit"),
    "ptau": ("tau", "p_tau"),
}


class SchemaError(ValueError):
    """Input CSV does not match the expected tunnelclock schema."""


def load_columns(path, kind: str) -> dict:
    """Read a CSV of the given schema kind into {column: float array}.

    Raises SchemaError naming the expected header when columns are
    missing, reordered, or the file is empty.
    """
    expected = SCHEMAS[kind]
    path = Path(path)
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise SchemaError(
                f"{path}: empty file; expected header {','.join(expected)}"
            ) from None
        if header != expected:
            raise SchemaError(
                f"{path}: header {','.join(header)!r} does not match the "
                f"{kind} schema; expected {','.join(expected)}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows under {','.join(expected)}")
    try:
        data = np.asarray(rows, dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric data ({exc})") from None
    if data.shape[1] != len(expected):
        raise SchemaError(
            f"{path}: row width {data.shape[1]} does not match the "
            f"{len(expected)}-column {kind} schema"
        )
    return {name: data[:, i] for i, name in enumerate(expected)}
