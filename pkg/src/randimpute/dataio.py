"""CSV reading and writing for experiment datasets.

Input files have a header containing ``t,y,x1,x2`` (extra columns are
ignored). Covariate fields that are empty, or equal to one of the recode
tokens, are treated as missing.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import CompletedDataset, Dataset, Unit, ValidationError, validate_dataset

COLUMNS = ("t", "y", "x1", "x2")


class DataError(ValidationError):
    """Malformed dataset file; ``row`` is the 1-based data row when known."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


def _parse(token: str, recode: set, row: int, col: str, optional: bool):
    tok = token.strip()
    if tok == "" or tok in recode:
        if not optional:
            raise DataError(f"{'treatment' if col == 't' else 'outcome'} missing", row)
        return None
    try:
        v = float(tok)
    except ValueError:
        raise DataError(f"unparseable value {tok!r} in column {col}", row) from None
    if v not in (0.0, 1.0):
        raise DataError(f"value {tok!r} in column {col} is not 0/1", row)
    return int(v)


def ingest_csv(path: str | os.PathLike, recode_rules: Iterable[str] = ()) -> Dataset:
    recode = {str(r).strip() for r in recode_rules}
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise DataError("empty file (no header)") from None
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise DataError(f"missing column(s): {', '.join(missing)}")
        pos = {c: header.index(c) for c in COLUMNS}
        units = []
        for row, rec in enumerate(reader, start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) < len(header):
                rec = rec + [""] * (len(header) - len(rec))
            vals = {c: _parse(rec[pos[c]], recode, row, c, c in ("x1", "x2")) for c in COLUMNS}
            units.append(Unit(vals["t"], vals["y"], vals["x1"], vals["x2"]))
    if not units:
        raise DataError("file contains no data rows")
    return validate_dataset(units)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_dataset_csv(data: Dataset | CompletedDataset, path: str | os.PathLike) -> None:
    """Write ``t,y,x1,x2``; missing covariates become empty fields."""
    d1 = np.asarray(data.d1, bool) if isinstance(data, Dataset) else np.zeros(data.n, bool)
    d2 = np.asarray(data.d2, bool) if isinstance(data, Dataset) else np.zeros(data.n, bool)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i in range(data.n):
            w.writerow(
                [
                    int(data.t[i]),
                    int(data.y[i]),
                    "" if d1[i] else _fmt(data.x1[i]),
                    "" if d2[i] else _fmt(data.x2[i]),
                ]
            )


def write_completed(datasets: Sequence[CompletedDataset | Dataset], out_dir, stem: str) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(datasets))))
    paths = []
    for k, ds in enumerate(datasets, start=1):
        p = out / f"{stem}_{k:0{width}d}.csv"
        write_dataset_csv(ds, p)
        paths.append(p)
    return paths
