"""Bundled toy datasets and randomized test-corpus generation."""

from importlib import resources

import numpy as np

from .dataset import Dataset, load_dataset
from .hypotheses import pool_from_matrix

__all__ = ["separable_toys", "hand_toy", "random_dataset", "random_matrix_pool"]


def _data_dir():
    return resources.files("optboost") / "data"


def separable_toys():
    """``{name: path}`` of the bundled datasets that stumps can separate."""
    root = _data_dir() / "separable"
    return {p.name[:-4]: p for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".csv")}


def hand_toy():
    """Paths of the three-point toy and its two-row mistake pool."""
    root = _data_dir()
    return root / "hand3.csv", root / "hand3_pool.csv"


def load_toy(name):
    return load_dataset(separable_toys()[name])


def random_dataset(rng, n=None, d=None):
    n = int(rng.integers(3, 51)) if n is None else n
    d = int(rng.integers(1, 6)) if d is None else d
    X = np.round(rng.normal(size=(n, d)), 3)
    y = rng.choice([-1, 1], size=n)
    y[:2] = (1, -1)  # both classes present
    return Dataset(X, y)


def random_matrix_pool(rng, data, m=None):
    """Random pool of ``m`` rows whose mistake rows are never all +1."""
    m = int(rng.integers(2, 201)) if m is None else m
    mistake = rng.choice(np.array([-1, 1], dtype=np.int8), size=(m, data.n))
    perfect = np.all(mistake == 1, axis=1)
    mistake[perfect, 0] = -1
    raw = mistake * data.labels[None, :]
    return pool_from_matrix(raw, data.labels)
