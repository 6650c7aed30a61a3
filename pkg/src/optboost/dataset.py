"""Labeled training sets loaded from CSV.

A :class:`Dataset` is the fixed sample every other module works on. It is
immutable: the arrays are flagged read-only at construction.
"""

import csv
import hashlib
import io
import math
from pathlib import Path

import numpy as np

from .errors import EmptyDataset, LabelError, ParseError

__all__ = ["Dataset", "load_dataset", "parse_dataset", "write_dataset"]


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class Dataset:
    """Feature matrix plus a vector of +1/-1 labels."""

    __slots__ = ("features", "labels", "feature_names", "label_name")

    def __init__(self, features, labels, feature_names=None, label_name=None):
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2:
            raise ParseError("features must be a 2-d matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ParseError(
                f"label vector length {labels.shape} does not match "
                f"{features.shape[0]} feature rows"
            )
        if features.shape[1] < 1:
            raise ParseError("at least one feature column is required")
        if not np.all(np.isfinite(features)):
            raise ParseError("feature values must be finite")
        if not np.all((labels == 1) | (labels == -1)):
            bad = int(np.flatnonzero((labels != 1) & (labels != -1))[0])
            raise LabelError(f"label at row {bad} is {labels[bad]!r}, expected +1 or -1")
        if features.shape[0] < 2:
            raise EmptyDataset(f"need at least 2 examples, got {features.shape[0]}")
        if feature_names is not None:
            feature_names = tuple(str(s) for s in feature_names)
            if len(feature_names) != features.shape[1]:
                raise ParseError("feature_names length does not match column count")

        object.__setattr__(self, "features", _readonly(features))
        object.__setattr__(self, "labels", _readonly(labels.astype(np.int8)))
        object.__setattr__(self, "feature_names", feature_names)
        object.__setattr__(self, "label_name", label_name)

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.feature_names == other.feature_names
            and self.label_name == other.label_name
        )

    def __hash__(self):
        return hash(self.digest())

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d})"

    def digest(self):
        """SHA-256 over shape, feature bytes and label bytes."""
        h = hashlib.sha256()
        h.update(f"{self.n}x{self.d};".encode())
        h.update(self.features.astype("<f8").tobytes())
        h.update(self.labels.astype("i1").tobytes())
        return h.hexdigest()


def _to_float(cell, row, col):
    s = cell.strip()
    if s == "":
        raise ParseError(f"empty cell at row {row}, column {col}")
    try:
        v = float(s)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r} at row {row}, column {col}") from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite cell {cell!r} at row {row}, column {col}")
    return v


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def parse_dataset(text, label_column=None):
    """Parse CSV text into a :class:`Dataset`.

    A header is assumed when any cell of the first row is non-numeric.
    ``label_column`` selects the label column by header name; ``None`` means
    the last column.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyDataset("no rows")

    header = None
    if not all(_is_number(c.strip()) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]

    width = len(header) if header is not None else len(rows[0]) if rows else 0
    if label_column is None:
        label_idx = width - 1
    else:
        if header is None:
            raise ParseError(f"label column {label_column!r} requested but file has no header")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise ParseError(f"no column named {label_column!r}") from None
    if width < 2:
        raise ParseError("need at least one feature column and one label column")

    feats, labels = [], []
    for r_i, row in enumerate(rows):
        lineno = r_i + (2 if header is not None else 1)
        if len(row) != width:
            raise ParseError(f"row {lineno} has {len(row)} cells, expected {width}")
        vals = [_to_float(c, lineno, k) for k, c in enumerate(row)]
        lab = vals.pop(label_idx)
        if lab not in (1.0, -1.0):
            raise LabelError(f"label {row[label_idx].strip()!r} at row {lineno} is not +1 or -1")
        feats.append(vals)
        labels.append(int(lab))

    if len(labels) < 2:
        raise EmptyDataset(f"need at least 2 examples, got {len(labels)}")

    names = None
    label_name = None
    if header is not None:
        label_name = header[label_idx]
        names = header[:label_idx] + header[label_idx + 1:]
    return Dataset(np.array(feats, dtype=np.float64), np.array(labels), names, label_name)


def load_dataset(path, label_column=None):
    """Read a CSV file; see :func:`parse_dataset` for the format."""
    try:
        text = Path(path).read_text()
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not a text file") from exc
    return parse_dataset(text, label_column)


def write_dataset(data, path):
    """Write ``data`` as CSV with the label as the last column.

    Floats are written with ``repr`` so reloading reproduces them exactly.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if data.feature_names is not None:
        w.writerow(list(data.feature_names) + [data.label_name or "label"])
    for x, y in zip(data.features, data.labels):
        w.writerow([repr(float(v)) for v in x] + [int(y)])
    Path(path).write_text(buf.getvalue())
