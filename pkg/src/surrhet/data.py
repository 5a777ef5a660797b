"""Observed-data model: CSV ingestion, validation, and train/test splitting.

A :class:`Dataset` holds the primary outcome ``y``, the surrogate marker
``s``, the binary group indicator ``g`` (0 = control, 1 = treated) and an
``n x p`` covariate matrix ``x`` with named columns. All ingestion is from
headed CSV files; the column mapping comes from a :class:`ColumnSchema`
rather than positions.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from surrhet.errors import CsvParseError, DataValidationError, DomainError, SchemaError

__all__ = [
    "ColumnSchema",
    "Dataset",
    "DiagnosticsSummary",
    "SplitDataset",
    "fraction_to_count",
    "load_csv",
    "split",
    "validate",
    "write_csv",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    if out is a:
        out = a.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ColumnSchema:
    """Column-name mapping for CSV ingestion.

    Parameters
    ----------
    outcome, surrogate, group : str
        Column names for y, s and g.
    covariates : tuple of str
        Covariate column names, in the order they should appear in ``x``.
    """

    outcome: str
    surrogate: str
    group: str
    covariates: tuple[str, ...]

    def __post_init__(self):
        if not self.covariates:
            raise SchemaError("schema must name at least one covariate column")
        names = [self.outcome, self.surrogate, self.group, *self.covariates]
        if len(set(names)) != len(names):
            raise SchemaError(f"schema maps the same column twice: {names}")

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ColumnSchema":
        """Load a schema from a JSON file with keys outcome/surrogate/group/covariates."""
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        missing = [k for k in ("outcome", "surrogate", "group", "covariates") if k not in raw]
        if missing:
            raise SchemaError(f"schema file {path} missing keys: {', '.join(missing)}")
        if not isinstance(raw["covariates"], (list, tuple)):
            raise SchemaError("schema key 'covariates' must be an ordered list")
        return cls(
            outcome=str(raw["outcome"]),
            surrogate=str(raw["surrogate"]),
            group=str(raw["group"]),
            covariates=tuple(str(c) for c in raw["covariates"]),
        )


@dataclass(frozen=True)
class Dataset:
    """Immutable observed-data container.

    Invariants enforced at construction: equal row counts everywhere,
    g only in {0, 1}, and no non-finite entries.
    """

    y: np.ndarray
    s: np.ndarray
    g: np.ndarray
    x: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        s = np.asarray(self.s, dtype=np.float64)
        g = np.asarray(self.g)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError("x must be a 2-D matrix")
        n = y.shape[0]
        if n < 1:
            raise ValueError("dataset must contain at least one row")
        if s.shape[0] != n or g.shape[0] != n or x.shape[0] != n:
            raise ValueError("y, s, g and x must share the same row count")
        if x.shape[1] != len(self.column_names):
            raise ValueError("column_names must match the covariate count")
        gi = g.astype(np.int64)
        if not np.array_equal(gi, g) or not np.isin(gi, (0, 1)).all():
            raise DomainError("group indicator must contain only 0 and 1")
        for name, arr in (("y", y), ("s", s), ("x", x)):
            if not np.isfinite(arr).all():
                raise ValueError(f"non-finite value in column block '{name}'")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "g", _frozen(gi))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n_control(self) -> int:
        return int(np.count_nonzero(self.g == 0))

    @property
    def n_treated(self) -> int:
        return int(np.count_nonzero(self.g == 1))

    def group_mask(self, g: int) -> np.ndarray:
        return self.g == g

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Row subset in the given index order."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.y[idx], self.s[idx], self.g[idx], self.x[idx], self.column_names)


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint train/test partition of a dataset."""

    train: Dataset
    test: Dataset
    test_indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "test_indices", _frozen(np.asarray(self.test_indices, dtype=np.int64)))


@dataclass(frozen=True)
class DiagnosticsSummary:
    """Output of :func:`validate`: group sizes, ranges and overlap warnings."""

    n_control: int
    n_treated: int
    column_ranges: dict = field(default_factory=dict)
    overlap_warnings: tuple[str, ...] = ()


def _parse_cell(raw: str, row: int, column: str) -> float:
    text = raw.strip()
    if not text:
        raise CsvParseError(f"empty cell at row {row}, column '{column}'", row=row, column=column)
    try:
        value = float(text)
    except ValueError:
        raise CsvParseError(
            f"non-numeric value {raw!r} at row {row}, column '{column}'", row=row, column=column
        ) from None
    if not math.isfinite(value):
        raise CsvParseError(f"non-finite value {raw!r} at row {row}, column '{column}'", row=row, column=column)
    return value


def load_csv(path: str | os.PathLike, schema: ColumnSchema) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Rows are kept in file order and covariates in schema order. Any parse
    failure raises before a partial dataset can escape. Row numbers in
    errors are 1-based data rows (the header is not counted).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        positions = {}
        for name in (schema.outcome, schema.surrogate, schema.group, *schema.covariates):
            try:
                positions[name] = header.index(name)
            except ValueError:
                raise SchemaError(f"column '{name}' not found in {path} (header: {header})") from None

        ys, ss, gs, xs = [], [], [], []
        for row_no, record in enumerate(reader, start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue  # ignore trailing blank lines
            if len(record) != len(header):
                raise CsvParseError(
                    f"row {row_no} has {len(record)} fields, expected {len(header)}", row=row_no
                )
            ys.append(_parse_cell(record[positions[schema.outcome]], row_no, schema.outcome))
            ss.append(_parse_cell(record[positions[schema.surrogate]], row_no, schema.surrogate))
            g_val = _parse_cell(record[positions[schema.group]], row_no, schema.group)
            if g_val not in (0.0, 1.0):
                raise DomainError(
                    f"group value {g_val!r} outside {{0, 1}} at row {row_no}, column '{schema.group}'"
                )
            gs.append(int(g_val))
            xs.append([_parse_cell(record[positions[c]], row_no, c) for c in schema.covariates])

    if not ys:
        raise CsvParseError(f"{path} contains a header but no data rows")
    return Dataset(
        y=np.array(ys, dtype=np.float64),
        s=np.array(ss, dtype=np.float64),
        g=np.array(gs, dtype=np.int64),
        x=np.array(xs, dtype=np.float64),
        column_names=schema.covariates,
    )


def write_csv(dataset: Dataset, path: str | os.PathLike, schema: ColumnSchema | None = None) -> None:
    """Write a dataset back to CSV.

    Floats use shortest round-trip decimal form, so load_csv(write_csv(d))
    reproduces the numeric values bit for bit.
    """
    if schema is None:
        schema = ColumnSchema("y", "s", "g", dataset.column_names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema.outcome, schema.surrogate, schema.group, *schema.covariates])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(dataset.y[i])), repr(float(dataset.s[i])), int(dataset.g[i])]
                + [repr(float(v)) for v in dataset.x[i]]
            )


def validate(dataset: Dataset) -> DiagnosticsSummary:
    """Group sizes, per-group covariate ranges and an empirical overlap screen.

    A covariate whose observed supports in the two groups do not intersect
    produces a warning (never an error); an empty group is fatal. The check
    is a cheap screen only: true positivity is not testable from data.
    """
    n0, n1 = dataset.n_control, dataset.n_treated
    if n0 == 0 or n1 == 0:
        raise DataValidationError(
            f"both groups must be non-empty (control={n0}, treated={n1})"
        )
    mask0 = dataset.group_mask(0)
    mask1 = dataset.group_mask(1)
    ranges = {}
    warnings = []
    for j, name in enumerate(dataset.column_names):
        lo0, hi0 = float(dataset.x[mask0, j].min()), float(dataset.x[mask0, j].max())
        lo1, hi1 = float(dataset.x[mask1, j].min()), float(dataset.x[mask1, j].max())
        ranges[name] = {"control": (lo0, hi0), "treated": (lo1, hi1)}
        if hi0 < lo1 or hi1 < lo0:
            warnings.append(
                f"covariate '{name}': observed supports do not overlap "
                f"(control [{lo0}, {hi0}], treated [{lo1}, {hi1}])"
            )
    return DiagnosticsSummary(
        n_control=n0, n_treated=n1, column_ranges=ranges, overlap_warnings=tuple(warnings)
    )


def fraction_to_count(fraction: float, n: int) -> int:
    """Convert a test-set fraction to an absolute count, rounding half up."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"test fraction must be in (0, 1), got {fraction}")
    return int(math.floor(fraction * n + 0.5))


def split(dataset: Dataset, test_size: int, rng: np.random.Generator) -> SplitDataset:
    """Uniform without-replacement train/test split.

    Test rows are drawn uniformly; both parts keep the original row order.
    Deterministic given the generator's seed.
    """
    n = dataset.n
    if not 1 <= test_size < n:
        raise ValueError(f"test_size must satisfy 1 <= test_size < n={n}, got {test_size}")
    test_idx = np.sort(rng.choice(n, size=test_size, replace=False))
    train_mask = np.ones(n, dtype=bool)
    train_mask[test_idx] = False
    train_idx = np.flatnonzero(train_mask)
    return SplitDataset(
        train=dataset.subset(train_idx),
        test=dataset.subset(test_idx),
        test_indices=test_idx,
    )
