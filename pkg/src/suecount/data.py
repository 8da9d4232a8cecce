"""CSV ingestion and the bundled reproduction datasets.

Files are RFC-4180 CSV with a header row, UTF-8, and ``.`` as the decimal
separator. Missing cells are an error; nothing is imputed.
"""

import csv
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import DatasetError, DatasetUnavailableError
from .regression import CountDataset

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "."})
FERTILITY_ENV = "SUE_FERTILITY_CSV"


@dataclass(frozen=True)
class DatasetSchema:
    """Which columns hold the response and the covariates."""

    response_column: str
    covariate_columns: tuple = field(default_factory=tuple)
    exposure: float = 1.0

    def __post_init__(self):
        cols = tuple(str(c) for c in self.covariate_columns)
        object.__setattr__(self, "covariate_columns", cols)
        if self.response_column in cols:
            raise DatasetError(f"response column {self.response_column!r} is also listed as a covariate")
        if len(set(cols)) != len(cols):
            raise DatasetError("covariate columns must be distinct")
        if not (self.exposure > 0 and math.isfinite(self.exposure)):
            raise DatasetError("exposure must be positive")


BIDS_SCHEMA = DatasetSchema(
    "numbids",
    ("leglrest", "rearest", "finrest", "whtknght", "bidprem", "insthold", "size", "sizesq", "regulatn"),
)

FERTILITY_SCHEMA = DatasetSchema(
    "children",
    (
        "german",
        "years_school",
        "voc_train",
        "university",
        "catholic",
        "protestant",
        "muslim",
        "rural",
        "year_birth",
        "age_marriage",
    ),
)

SCHEMAS = {"bids": BIDS_SCHEMA, "fertility": FERTILITY_SCHEMA}


def _parse_cell(text, row, column, integer):
    raw = text.strip()
    if raw.lower() in MISSING_TOKENS:
        raise DatasetError(f"missing value at row {row}, column {column!r}")
    try:
        value = float(raw)
    except ValueError:
        raise DatasetError(f"cannot parse {raw!r} at row {row}, column {column!r}") from None
    if not math.isfinite(value):
        raise DatasetError(f"non-finite value {raw!r} at row {row}, column {column!r}")
    if integer and (value < 0 or value != math.floor(value)):
        raise DatasetError(f"count {raw!r} at row {row}, column {column!r} is not a non-negative integer")
    return value


def read_table(path):
    """Header and rows of a CSV file as strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: no header row") from None
        rows = [r for r in reader if r]
    return header, rows


def load_csv(path, schema):
    """Read a count dataset.

    Row numbers in error messages are 1-based file lines, so the first data
    row is row 2.
    """
    header, rows = read_table(path)
    index = {name: i for i, name in enumerate(header)}
    wanted = (schema.response_column,) + schema.covariate_columns
    absent = [c for c in wanted if c not in index]
    if absent:
        raise DatasetError(f"{path}: columns not found: {absent}")
    if not rows:
        raise DatasetError(f"{path}: dataset is empty")
    y = np.empty(len(rows))
    X = np.empty((len(rows), len(schema.covariate_columns)))
    for i, cells in enumerate(rows):
        line = i + 2
        if len(cells) != len(header):
            raise DatasetError(f"row {line} has {len(cells)} cells, header has {len(header)}")
        y[i] = _parse_cell(cells[index[schema.response_column]], line, schema.response_column, True)
        for k, col in enumerate(schema.covariate_columns):
            X[i, k] = _parse_cell(cells[index[col]], line, col, False)
    return CountDataset(y.astype(np.int64), X, schema.covariate_columns, schema.exposure)


def write_csv(dataset, path, response_column="y"):
    """Write a dataset so that :func:`load_csv` reads it back exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([response_column, *dataset.covariate_names])
        for yi, xi in zip(dataset.responses, dataset.covariates):
            w.writerow([int(yi), *(repr(float(v)) for v in xi)])
    return DatasetSchema(response_column, dataset.covariate_names, dataset.exposure)


def _bundled(name):
    ref = resources.files("suecount") / "data" / name
    return Path(str(ref)) if ref.is_file() else None


def adapt_fertility(path, out_path):
    """Convert a raw fertility export to the bundled column layout.

    Accepts yes/no flags and a categorical ``religion`` column (levels
    ``catholic``, ``protestant``, ``muslim`` and a reference level), as in
    the common R distribution of the German fertility survey.
    """
    header, rows = read_table(path)
    idx = {h.lower(): i for i, h in enumerate(header)}

    def flag(v):
        s = v.strip().lower()
        if s in ("yes", "true"):
            return "1"
        if s in ("no", "false"):
            return "0"
        return s

    out = []
    for cells in rows:
        rec = {}
        for col in ("children", "german", "years_school", "voc_train", "university", "rural",
                    "year_birth", "age_marriage"):
            if col not in idx:
                raise DatasetError(f"{path}: column {col!r} not found")
            rec[col] = flag(cells[idx[col]])
        if "religion" in idx:
            rel = cells[idx["religion"]].strip().lower()
            for level in ("catholic", "protestant", "muslim"):
                rec[level] = "1" if rel == level else "0"
        else:
            for level in ("catholic", "protestant", "muslim"):
                rec[level] = flag(cells[idx[level]])
        out.append(rec)
    cols = [FERTILITY_SCHEMA.response_column, *FERTILITY_SCHEMA.covariate_columns]
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for rec in out:
            w.writerow([rec[c] for c in cols])
    return out_path


def dataset_path(name):
    """Location of a bundled dataset.

    The fertility survey is not redistributable with the package; point
    ``SUE_FERTILITY_CSV`` at a copy in the bundled layout (see
    :func:`adapt_fertility`).
    """
    if name not in SCHEMAS:
        raise DatasetError(f"unknown dataset {name!r}; choose from {sorted(SCHEMAS)}")
    found = _bundled(f"{name}.csv")
    if found is not None:
        return found
    if name == "fertility":
        env = os.environ.get(FERTILITY_ENV)
        if env and Path(env).is_file():
            return Path(env)
    raise DatasetUnavailableError(
        f"dataset {name!r} is not bundled; set {FERTILITY_ENV} to a CSV with columns "
        f"{[FERTILITY_SCHEMA.response_column, *FERTILITY_SCHEMA.covariate_columns]}"
    )


def load_dataset(name):
    """Load a reproduction dataset by name (``"bids"`` or ``"fertility"``)."""
    return load_csv(dataset_path(name), SCHEMAS[name])
