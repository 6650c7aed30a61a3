"""Finite dichotomy pools: the raw labelling set and its label-multiplied twin.

Row ``j`` of ``raw`` is the prediction vector of hypothesis ``j`` on the
training points; row ``j`` of ``mistake`` is that vector multiplied
elementwise by the labels (+1 where the hypothesis is right, -1 where wrong).
"""

import csv
import hashlib
import io
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DegeneratePool, EntryError, ShapeError

__all__ = [
    "Stump",
    "DichotomyPool",
    "dedup_rows",
    "enumerate_stumps",
    "load_dichotomy_matrix",
    "parse_dichotomy_matrix",
    "pool_from_matrix",
]


class Stump(NamedTuple):
    """x -> polarity * sign(x[feature] - threshold), with sign(0) = +1."""

    feature: int
    threshold: float
    polarity: int

    def predict(self, features):
        col = np.asarray(features, dtype=np.float64)[:, self.feature]
        s = np.where(col - self.threshold >= 0.0, 1, -1).astype(np.int8)
        return s if self.polarity > 0 else -s


def dedup_rows(matrix):
    """Indices of the first occurrence of every distinct row, in order."""
    seen = set()
    keep = []
    for j, row in enumerate(np.ascontiguousarray(matrix, dtype=np.int8)):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(j)
    return keep


class DichotomyPool:
    __slots__ = ("raw", "mistake", "hypothesis_ids", "_mistake_t")

    def __init__(self, raw, labels, hypothesis_ids):
        raw = np.array(raw, dtype=np.int8)
        labels = np.asarray(labels, dtype=np.int8)
        if raw.ndim != 2 or raw.shape[0] < 1:
            raise DegeneratePool("pool must contain at least one row")
        if raw.shape[1] != labels.shape[0]:
            raise ShapeError(f"pool has {raw.shape[1]} columns but dataset has {labels.shape[0]} points")
        if not np.all((raw == 1) | (raw == -1)):
            raise EntryError("pool entries must be +1 or -1")
        if len(hypothesis_ids) != raw.shape[0]:
            raise ValueError("one hypothesis id per row is required")
        mistake = raw * labels[None, :]
        raw.setflags(write=False)
        mistake.setflags(write=False)
        # column-major copy for the edge kernel: row i holds eta_{., i}
        mistake_t = np.ascontiguousarray(mistake.T, dtype=np.float64)
        mistake_t.setflags(write=False)
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "mistake", mistake)
        object.__setattr__(self, "hypothesis_ids", tuple(hypothesis_ids))
        object.__setattr__(self, "_mistake_t", mistake_t)

    def __setattr__(self, name, value):
        raise AttributeError("DichotomyPool is immutable")

    @property
    def m(self):
        return self.raw.shape[0]

    @property
    def n(self):
        return self.raw.shape[1]

    @property
    def mistake_t(self):
        """n x m float64 transpose of ``mistake`` (C-contiguous)."""
        return self._mistake_t

    def digest(self):
        h = hashlib.sha256()
        h.update(f"{self.m}x{self.n};".encode())
        h.update(self.raw.tobytes())
        return h.hexdigest()

    def __repr__(self):
        return f"DichotomyPool(m={self.m}, n={self.n})"


def pool_from_matrix(raw, labels, hypothesis_ids=None):
    """Deduplicate ``raw`` (first occurrence wins) and build a pool."""
    raw = np.asarray(raw, dtype=np.int8)
    keep = dedup_rows(raw)
    if not keep:
        raise DegeneratePool("no rows")
    ids = list(range(raw.shape[0])) if hypothesis_ids is None else list(hypothesis_ids)
    return DichotomyPool(raw[keep], labels, [ids[j] for j in keep])


def _thresholds(column):
    vals = np.unique(column)
    below = vals[0] - 1.0
    mids = (vals[:-1] + vals[1:]) / 2.0
    return [float(below)] + [float(t) for t in mids]


def enumerate_stumps(data):
    """All distinct decision-stump dichotomies on ``data``.

    Order is feature-major, thresholds ascending (one below the minimum,
    then midpoints between consecutive distinct values), polarity +1 before
    -1. Rows that repeat an earlier prediction vector are dropped.
    """
    rows, ids = [], []
    for f in range(data.d):
        col = data.features[:, f]
        for theta in _thresholds(col):
            base = np.where(col - theta >= 0.0, 1, -1).astype(np.int8)
            rows.append(base)
            ids.append(Stump(f, theta, 1))
            rows.append(-base)
            ids.append(Stump(f, theta, -1))
    if not rows:
        raise DegeneratePool("stump enumeration produced no rows")
    return pool_from_matrix(np.vstack(rows), data.labels, ids)


def parse_dichotomy_matrix(text, data):
    """Parse a headerless CSV of +1/-1 entries, one hypothesis per row."""
    raw = []
    for r_i, row in enumerate(csv.reader(io.StringIO(text))):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != data.n:
            raise ShapeError(f"row {r_i + 1} has {len(row)} entries, dataset has n={data.n}")
        vals = []
        for c in row:
            s = c.strip()
            if s in ("1", "+1"):
                vals.append(1)
            elif s == "-1":
                vals.append(-1)
            else:
                raise EntryError(f"entry {c!r} on row {r_i + 1} is not +1 or -1")
        raw.append(vals)
    if not raw:
        raise ShapeError("dichotomy matrix has no rows")
    return pool_from_matrix(np.array(raw, dtype=np.int8), data.labels)


def load_dichotomy_matrix(path, data):
    return parse_dichotomy_matrix(Path(path).read_text(), data)
