"""
Exact brute-force k-nearest-neighbour classification over a feature subset.

Neighbour order is (distance, canonical row id), so the neighbour set does not
depend on how the training rows are stored. Vote ties go to the category of
the nearest neighbour among the tied categories.
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Sequence

import numpy as np

from .dataset import Category, Dataset, N_CATEGORIES

EUCLIDEAN = "euclidean"
MANHATTAN = "manhattan"
UNIFORM = "uniform"
INVERSE_DISTANCE = "inverse-distance"

# Rows of test queries handled per distance block; bounds memory at
# roughly _BLOCK * n_train * 8 bytes.
_BLOCK = 256


@dataclass(frozen=True)
class KnnConfig:
    k: int = 10
    metric: str = EUCLIDEAN
    weighting: str = UNIFORM
    # Worker threads for evaluate(); results do not depend on it.
    threads: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.metric not in (EUCLIDEAN, MANHATTAN):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.weighting not in (UNIFORM, INVERSE_DISTANCE):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    def to_dict(self):
        return {"k": self.k, "metric": self.metric, "weighting": self.weighting}

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: data[k] for k in ("k", "metric", "weighting") if k in data})


def check_subset(subset: Sequence[int], n_features: int) -> np.ndarray:
    """Validate a 1-based feature subset; returns 0-based column numbers in ascending order."""
    cols = np.asarray(list(subset), dtype=np.int64)
    if cols.size == 0:
        raise ValueError("feature subset is empty")
    if len(set(cols.tolist())) != cols.size:
        raise ValueError(f"duplicate features in subset {list(subset)}")
    if cols.min() < 1 or cols.max() > n_features:
        raise ValueError(f"subset {list(subset)} outside features 1..{n_features}")
    # Summation order is fixed by ascending feature index so the distance
    # bits do not depend on the order the subset was built in.
    return np.sort(cols) - 1


def distance(a, b, subset: Sequence[int], metric: str = EUCLIDEAN) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cols = check_subset(subset, len(a))
    d = _raw(a[None, cols], b[None, cols], metric)[0, 0]
    return float(np.sqrt(d)) if metric == EUCLIDEAN else float(d)


def _raw(queries: np.ndarray, train: np.ndarray, metric: str) -> np.ndarray:
    """Squared euclidean or manhattan distances, accumulated one feature at a time."""
    acc = np.zeros((queries.shape[0], train.shape[0]))
    for j in range(queries.shape[1]):
        diff = queries[:, j, None] - train[None, :, j]
        if metric == EUCLIDEAN:
            acc += diff * diff
        else:
            acc += np.abs(diff)
    return acc


def nearest(raw: np.ndarray, row_ids: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k nearest training rows for one query, nearest first.

    Equivalent to a full sort by (distance, row id) truncated to k.
    """
    n = raw.shape[0]
    if k >= n:
        return np.lexsort((row_ids, raw))
    kth = np.partition(raw, k - 1)[k - 1]
    cand = np.flatnonzero(raw <= kth)
    return cand[np.lexsort((row_ids[cand], raw[cand]))][:k]


def vote(labels: np.ndarray, dists: np.ndarray, weighting: str = UNIFORM,
         n_classes: int = N_CATEGORIES) -> int:
    """Winning label among neighbours given nearest first.

    ``dists`` are true metric distances (used only for inverse-distance
    weighting). Neighbours at distance 0 outvote everything else.
    """
    if weighting == UNIFORM:
        scores = np.bincount(labels, minlength=n_classes)
        voters = labels
    else:
        zero = dists == 0
        if zero.any():
            voters = labels[zero]
            scores = np.bincount(voters, minlength=n_classes).astype(np.float64)
        else:
            voters = labels
            scores = np.bincount(labels, weights=1.0 / dists, minlength=n_classes)
    tied = np.flatnonzero(scores == scores.max())
    if len(tied) == 1:
        return int(tied[0])
    for label in voters:
        if label in tied:
            return int(label)
    return int(tied[0])


def _predict_block(train_x, train_y, row_ids, queries, cfg: KnnConfig) -> np.ndarray:
    raw = _raw(queries, train_x, cfg.metric)
    k = min(cfg.k, train_x.shape[0])
    n_classes = max(N_CATEGORIES, int(train_y.max()) + 1)
    out = np.empty(queries.shape[0], dtype=np.int64)
    for q in range(queries.shape[0]):
        nb = nearest(raw[q], row_ids, k)
        d = raw[q, nb]
        if cfg.metric == EUCLIDEAN and cfg.weighting != UNIFORM:
            d = np.sqrt(d)
        out[q] = vote(train_y[nb], d, cfg.weighting, n_classes)
    return out


def predict_many(train: Dataset, queries: np.ndarray, subset: Sequence[int],
                 cfg: KnnConfig = KnnConfig()) -> np.ndarray:
    """Predicted labels for each row of ``queries`` (full 41-column records)."""
    if len(train) == 0:
        raise ValueError("empty training set")
    cols = check_subset(subset, train.n_features)
    train_x = train.values[:, cols]
    q = np.asarray(queries, dtype=np.float64)[:, cols]
    blocks = [(s, min(s + _BLOCK, len(q))) for s in range(0, len(q), _BLOCK)]

    def run(block):
        s, e = block
        return _predict_block(train_x, train.labels, train.row_ids, q[s:e], cfg)

    if cfg.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def predict(train: Dataset, query, subset: Sequence[int], cfg: KnnConfig = KnnConfig()) -> Category:
    """Category of a single record by majority vote of its k nearest training rows."""
    label = predict_many(train, np.asarray(query, dtype=np.float64)[None, :], subset, cfg)[0]
    return Category(label) if label < N_CATEGORIES else int(label)


@dataclass
class EvaluationReport:
    accuracy: float
    positives: int
    total: int
    confusion: List[List[int]]
    subset: List[int]
    k: int
    elapsed: float = 0.0

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("elapsed")
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2)

    CSV_HEADER = "accuracy,positives,total,k,subset"

    def csv_row(self) -> str:
        subset = ",".join(map(str, self.subset))
        return f'{self.accuracy!r},{self.positives},{self.total},{self.k},"{subset}"'


def evaluate(train: Dataset, test: Dataset, subset: Sequence[int],
             cfg: KnnConfig = KnnConfig()) -> EvaluationReport:
    """Accuracy = correct predictions / test rows, plus a 5x5 confusion matrix (rows = truth)."""
    if len(test) == 0:
        raise ValueError("empty test set")
    if train.schema != test.schema:
        raise ValueError("train and test schemas differ")
    start = time.perf_counter()
    pred = predict_many(train, test.values, subset, cfg)
    n = max(N_CATEGORIES, int(max(pred.max(), test.labels.max())) + 1)
    confusion = np.bincount(test.labels * n + pred, minlength=n * n).reshape(n, n)
    positives = int(np.trace(confusion))
    return EvaluationReport(
        accuracy=positives / len(test),
        positives=positives,
        total=len(test),
        confusion=confusion.tolist(),
        subset=[int(i) for i in subset],
        k=cfg.k,
        elapsed=time.perf_counter() - start,
    )
