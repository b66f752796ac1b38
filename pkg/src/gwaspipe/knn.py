"""Brute-force k-nearest-neighbour classifier over l1, l2 or l-infinity.

Neighbours are ordered by ``(distance, training index)``; an even split of
votes predicts 0.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import RealDataset

# query rows per distance block; bounds memory at CHUNK * n_train doubles
CHUNK = 512


class Norm(enum.Enum):
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown norm {value!r}; expected l1, l2 or linf") from None

    @property
    def metric(self):
        return {Norm.L1: "cityblock", Norm.L2: "euclidean", Norm.LINF: "chebyshev"}[self]


@dataclass(frozen=True, eq=False)
class KnnModel:
    train: RealDataset
    k: int
    norm: Norm = Norm.L2


def fit(d: RealDataset, k: int, norm=Norm.L2) -> KnnModel:
    if not (1 <= k <= d.rows):
        raise ValueError(f"k must lie in [1, {d.rows}], got {k}")
    return KnnModel(d, int(k), Norm.parse(norm))


def _queries(m: KnnModel, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != m.train.cols:
        raise ValueError(f"query has {X.shape[1]} coordinates, model expects {m.train.cols}")
    if not np.all(np.isfinite(X)):
        raise ValueError("query coordinates must be finite")
    return X, single


def _neighbors_block(m: KnnModel, X):
    D = cdist(X, m.train.cells, metric=m.norm.metric)
    # stable sort keeps ascending training index among equal distances
    order = np.argsort(D, axis=1, kind="stable")[:, : m.k]
    return order, np.take_along_axis(D, order, axis=1)


def kneighbors_batch(m: KnnModel, X, workers: int = 1):
    """Indices and distances of the ``k`` nearest rows for each query row."""
    X, _ = _queries(m, X)
    chunks = [X[i:i + CHUNK] for i in range(0, X.shape[0], CHUNK)] or [X]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _neighbors_block(m, c), chunks))
    else:
        parts = [_neighbors_block(m, c) for c in chunks]
    idx = np.concatenate([p[0] for p in parts])
    dist = np.concatenate([p[1] for p in parts])
    return idx, dist


def kneighbors(m: KnnModel, x):
    """Ordered ``[(index, distance), ...]`` of the ``k`` nearest training rows."""
    x, _ = _queries(m, x)
    if x.shape[0] != 1:
        raise ValueError("kneighbors takes a single query row")
    idx, dist = _neighbors_block(m, x)
    return [(int(i), float(r)) for i, r in zip(idx[0], dist[0])]


def vote_fraction_batch(m: KnnModel, X, workers: int = 1):
    idx, _ = kneighbors_batch(m, X, workers)
    return m.train.labels[idx].sum(axis=1) / m.k


def predict_batch(m: KnnModel, X, workers: int = 1):
    idx, _ = kneighbors_batch(m, X, workers)
    ones = m.train.labels[idx].sum(axis=1).astype(np.int64)
    return (2 * ones > m.k).astype(np.int8)


def vote_fraction(m: KnnModel, x) -> float:
    return float(vote_fraction_batch(m, np.atleast_2d(x))[0])


def predict(m: KnnModel, x) -> int:
    return int(predict_batch(m, np.atleast_2d(x))[0])
