"""Dataset containers, validation and CSV ingestion.

A ``Dataset`` holds one domain's covariates, binary treatment and outcome.
There is no implicit intercept anywhere in the package: append a constant
column yourself if the model needs one.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, DegenerateDataError


@dataclass(frozen=True)
class GroupCounts:
    n_treated: int
    n_control: int

    @property
    def n(self) -> int:
        return self.n_treated + self.n_control


@dataclass(frozen=True, eq=False)
class Dataset:
    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    columns: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.array(self.covariates, dtype=np.float64, copy=True)
        z = np.array(self.treatment, dtype=np.float64, copy=True).reshape(-1)
        y = np.array(self.outcome, dtype=np.float64, copy=True).reshape(-1)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError("covariates must be a 2-d array")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DataError(f"dataset needs n >= 1 and d >= 1, got n={n}, d={d}")
        if z.shape[0] != n or y.shape[0] != n:
            raise DataError(
                f"row count mismatch: covariates {n}, treatment {z.shape[0]}, outcome {y.shape[0]}")
        bad = np.flatnonzero((z != 0.0) & (z != 1.0))
        if bad.size:
            raise DataError(f"treatment not binary at row {bad[0]}: {z[bad[0]]!r}")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite covariate at row {i}, column {j}")
        if not np.all(np.isfinite(y)):
            i = np.flatnonzero(~np.isfinite(y))[0]
            raise DataError(f"non-finite outcome at row {i}")
        cols = tuple(self.columns) if self.columns else tuple(f"x{j + 1}" for j in range(d))
        if len(cols) != d:
            raise DataError(f"{len(cols)} column names for {d} covariates")
        for a in (X, z, y):
            a.setflags(write=False)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "treatment", z)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "columns", cols)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @property
    def counts(self) -> GroupCounts:
        n1 = int(self.treatment.sum())
        return GroupCounts(n_treated=n1, n_control=self.n - n1)

    def response(self, name: str) -> np.ndarray:
        if name == "treatment":
            return self.treatment
        if name == "outcome":
            return self.outcome
        raise ValueError(f"response must be 'treatment' or 'outcome', got {name!r}")

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.covariates[rows], self.treatment[rows], self.outcome[rows], self.columns)

    def arm(self, z: int) -> "Dataset":
        return self.subset(np.flatnonzero(self.treatment == z))

    def with_covariates(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, self.treatment, self.outcome, self.columns)

    def require_both_arms(self, label: str = "dataset") -> None:
        c = self.counts
        if c.n_treated == 0:
            raise DegenerateDataError(f"{label} has no treated rows (arm z=1 empty)")
        if c.n_control == 0:
            raise DegenerateDataError(f"{label} has no control rows (arm z=0 empty)")

    def equals(self, other: "Dataset") -> bool:
        return (self.columns == other.columns
                and np.array_equal(self.covariates, other.covariates)
                and np.array_equal(self.treatment, other.treatment)
                and np.array_equal(self.outcome, other.outcome))


@dataclass(frozen=True)
class DomainPair:
    target: Dataset
    source: Dataset

    def __post_init__(self):
        if self.target.d != self.source.d:
            raise DataError(
                f"target and source covariate dimensions differ: {self.target.d} vs {self.source.d}")

    @property
    def d(self) -> int:
        return self.target.d

    def merged(self) -> Dataset:
        """Row-concatenation of target then source."""
        t, s = self.target, self.source
        return Dataset(np.vstack([t.covariates, s.covariates]),
                       np.concatenate([t.treatment, s.treatment]),
                       np.concatenate([t.outcome, s.outcome]), t.columns)


def concat(parts: Sequence[Dataset]) -> Dataset:
    return Dataset(np.vstack([p.covariates for p in parts]),
                   np.concatenate([p.treatment for p in parts]),
                   np.concatenate([p.outcome for p in parts]), parts[0].columns)


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"non-numeric cell at row {row}, column {col!r}: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value at row {row}, column {col!r}: {text!r}")
    return v


def load_csv(path, treatment_col: str = "z", outcome_col: str = "y") -> Dataset:
    """Read a header-first CSV; every column other than treatment/outcome is a covariate.

    Row numbers in error messages are 1-based data rows (the header is row 0).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"empty file: {path}")
        header = [h.strip() for h in header]
        for name in (treatment_col, outcome_col):
            if name not in header:
                raise DataError(f"missing column {name!r} in {path}")
        zi, yi = header.index(treatment_col), header.index(outcome_col)
        cov_idx = [j for j in range(len(header)) if j not in (zi, yi)]
        if not cov_idx:
            raise DataError(f"no covariate columns in {path}")
        X, z, y = [], [], []
        for k, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"row {k} has {len(rec)} fields, header has {len(header)}")
            zv = _parse_float(rec[zi], k, treatment_col)
            if zv not in (0.0, 1.0):
                raise DataError(f"treatment not binary at row {k}: {rec[zi]!r}")
            z.append(zv)
            y.append(_parse_float(rec[yi], k, outcome_col))
            X.append([_parse_float(rec[j], k, header[j]) for j in cov_idx])
    if not z:
        raise DataError(f"empty file (no data rows): {path}")
    return Dataset(np.array(X), np.array(z), np.array(y), tuple(header[j] for j in cov_idx))


def write_csv(data: Dataset, path, treatment_col: str = "z", outcome_col: str = "y") -> None:
    """Write with ``repr`` formatting so that ``load_csv`` round-trips bit-for-bit."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*data.columns, treatment_col, outcome_col])
        for xi, zi, yi in zip(data.covariates, data.treatment, data.outcome):
            w.writerow([*(repr(float(v)) for v in xi), str(int(zi)), repr(float(yi))])


def split_by_covariate(data: Dataset, col_index: int, target_label: float,
                       drop_column: bool = False) -> DomainPair:
    """Partition rows on a two-valued covariate: rows equal to ``target_label`` form the target."""
    if not 0 <= col_index < data.d:
        raise DataError(f"column index {col_index} out of range for d={data.d}")
    col = data.covariates[:, col_index]
    labels = np.unique(col)
    if labels.size != 2:
        raise DataError(
            f"degenerate partition: column {col_index} has {labels.size} distinct values, need 2")
    if target_label not in labels:
        raise DataError(f"target label {target_label!r} not present in column {col_index}")
    mask = col == target_label
    keep = [j for j in range(data.d) if not (drop_column and j == col_index)]
    if not keep:
        raise DataError("dropping the partition column leaves no covariates")
    X = data.covariates[:, keep]
    cols = tuple(data.columns[j] for j in keep)

    def part(m):
        return Dataset(X[m], data.treatment[m], data.outcome[m], cols)

    return DomainPair(target=part(mask), source=part(~mask))


def column_scales(data: Dataset) -> np.ndarray:
    """Per-column standard deviations (population form); constant columns get scale 1.

    Used for the optional scale-only standardization: without an implicit
    intercept, centering would change the model, so only scaling is applied.
    """
    s = data.covariates.std(axis=0)
    s[s == 0] = 1.0
    return s
