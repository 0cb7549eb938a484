"""Dataset container, CSV ingestion, and the embedded 13-body orbital table.

A :class:`Dataset` is an immutable matrix of finite floats with named
columns and an optional binary label vector (1 marks an anomaly).  CSV
loading is strict on purpose: a single malformed or non-finite cell aborts
with its row and column named, because silently dropped rows would skew
both training and calibration.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

# Orbital period T (Julian years) and semi-major axis a (AU) for the eight
# planets and the five best-known dwarf planets, from standard published
# ephemerides.  In these units T^2/a^3 is within 5% of 1 for every body.
KEPLER_BODIES = (
    ("Mercury", 0.240846, 0.387098),
    ("Venus", 0.615198, 0.723332),
    ("Earth", 1.000017, 1.000000),
    ("Mars", 1.880848, 1.523679),
    ("Jupiter", 11.862, 5.2044),
    ("Saturn", 29.4571, 9.5826),
    ("Uranus", 84.0205, 19.2184),
    ("Neptune", 164.8, 30.07),
    ("Ceres", 4.604, 2.7675),
    ("Pluto", 247.94, 39.482),
    ("Haumea", 285.4, 43.335),
    ("Makemake", 306.21, 45.430),
    ("Eris", 559.07, 67.864),
)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable named-column matrix with an optional binary label vector."""

    rows: np.ndarray
    feature_names: tuple
    labels: object = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64, order="C", copy=True)
        if rows.ndim != 2 or rows.shape[1] < 1:
            raise ValueError("rows must be a 2-D matrix with at least one column")
        if not np.all(np.isfinite(rows)):
            raise ValueError("rows contain non-finite values")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != rows.shape[1]:
            raise ValueError("feature name count does not match column count")
        if any(not n for n in names):
            raise ValueError("feature names must be nonempty")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        labels = self.labels
        if labels is not None:
            labels = np.array(labels, dtype=np.int64, copy=True)
            if labels.shape != (rows.shape[0],):
                raise ValueError("labels must have one entry per row")
            if not np.isin(labels, (0, 1)).all():
                raise ValueError("labels must be 0 or 1")
            labels.flags.writeable = False
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.rows.shape[0]

    @property
    def dimension(self):
        return self.rows.shape[1]


def _parse_cell(text, row_number, column_name):
    try:
        value = float(text)
    except ValueError:
        raise ValueError(
            f"row {row_number}, column {column_name!r}: "
            f"could not parse {text.strip()!r} as a number"
        ) from None
    if not math.isfinite(value):
        raise ValueError(
            f"row {row_number}, column {column_name!r}: non-finite value {text.strip()!r}"
        )
    return value


def load_csv(path, label_column=None):
    """Read a header-first CSV into a Dataset, splitting off the label column.

    Every non-label cell must parse as a finite decimal; label cells must be
    0 or 1.  Errors name the offending row (1-based, header = row 1) and
    column.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        header = [name.strip() for name in header]
        if len(set(header)) != len(header):
            duplicates = sorted({n for n in header if header.count(n) > 1})
            raise ValueError(f"{path}: duplicate header column(s): {duplicates}")
        if label_column is not None and label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r} in header")
        label_index = header.index(label_column) if label_column is not None else None

        rows, labels = [], []
        for row_number, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise ValueError(
                    f"row {row_number}: expected {len(header)} cells, "
                    f"got {len(record)}"
                )
            values = []
            for j, cell in enumerate(record):
                value = _parse_cell(cell, row_number, header[j])
                if j == label_index:
                    if value not in (0.0, 1.0):
                        raise ValueError(
                            f"row {row_number}, column {header[j]!r}: "
                            f"label must be 0 or 1, got {cell.strip()!r}"
                        )
                    labels.append(int(value))
                else:
                    values.append(value)
            rows.append(values)

    names = [n for j, n in enumerate(header) if j != label_index]
    matrix = (np.array(rows, dtype=np.float64) if rows
              else np.empty((0, len(names)), dtype=np.float64))
    return Dataset(
        rows=matrix,
        feature_names=tuple(names),
        labels=labels if label_column is not None else None,
    )


def write_csv(ds, path, label_column="label"):
    """Write a Dataset as CSV; inverse of :func:`load_csv` up to float repr."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        header = list(ds.feature_names)
        if ds.labels is not None:
            header.append(label_column)
        writer.writerow(header)
        for i in range(len(ds)):
            record = [repr(float(v)) for v in ds.rows[i]]
            if ds.labels is not None:
                record.append(str(int(ds.labels[i])))
            writer.writerow(record)


def kepler_dataset():
    """The embedded 13-body orbital table: features (T, a), no labels."""
    rows = np.array([(t, a) for _, t, a in KEPLER_BODIES], dtype=np.float64)
    return Dataset(rows=rows, feature_names=("T", "a"))


def train_test_split(ds, train_fraction, seed):
    """One-class split: train on normal rows only, test on the remainder.

    A fraction ``train_fraction`` of the label-0 rows (chosen uniformly by
    ``seed``) forms the training half; everything else — the remaining
    normal rows plus every anomaly — forms the test half.  Both halves keep
    the original row order and carry their labels.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    if ds.labels is None:
        raise ValueError("train_test_split requires a labeled dataset")
    normal_indices = np.flatnonzero(ds.labels == 0)
    n_train = int(len(normal_indices) * train_fraction)
    if n_train < 1:
        raise ValueError(
            f"insufficient normal rows: {len(normal_indices)} normals at "
            f"fraction {train_fraction} leave an empty training half"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.permutation(normal_indices)[:n_train]
    train_mask = np.zeros(len(ds), dtype=bool)
    train_mask[chosen] = True

    def take(mask):
        return Dataset(
            rows=ds.rows[mask],
            feature_names=ds.feature_names,
            labels=np.asarray(ds.labels)[mask],
        )

    return take(train_mask), take(~train_mask)
