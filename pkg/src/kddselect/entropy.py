"""
Information-gain filter: class entropy, conditional entropy of the class
given a (discretized) feature, gain, and the per-feature gain ranking.

All quantities are in bits; 0 * log(0) is taken as 0.
"""

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .dataset import CONTINUOUS, DISCRETE, Category, Dataset

EQUAL_FREQUENCY = "equal-frequency"
EQUAL_WIDTH = "equal-width"

# Negative gains this close to zero are rounding noise.
_NEGATIVE_GUARD = 1e-12


@dataclass(frozen=True)
class DiscretizationSpec:
    method: str = EQUAL_FREQUENCY
    bins: int = 10

    def __post_init__(self):
        if self.method not in (EQUAL_FREQUENCY, EQUAL_WIDTH):
            raise ValueError(f"unknown discretization method {self.method!r}")
        if self.bins < 2:
            raise ValueError("need at least 2 bins")


def _entropy_of_counts(counts: np.ndarray) -> float:
    counts = counts[counts > 0]
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(-np.sum(p * np.log2(p))) + 0.0


def _codes(x) -> np.ndarray:
    return np.unique(np.asarray(x), return_inverse=True)[1].reshape(-1)


def class_entropy(labels: Sequence) -> float:
    """Expected information (bits) needed to classify a sample drawn from ``labels``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("class entropy of an empty label sequence")
    return _entropy_of_counts(np.bincount(_codes(labels)))


def contingency(bins: Sequence, labels: Sequence) -> np.ndarray:
    """Counts table with one row per distinct bin and one column per distinct label."""
    bins = np.asarray(bins)
    labels = np.asarray(labels)
    if len(bins) != len(labels):
        raise ValueError(f"length mismatch: {len(bins)} bins vs {len(labels)} labels")
    if len(bins) == 0:
        raise ValueError("empty input")
    b = _codes(bins)
    y = _codes(labels)
    n_classes = int(y.max()) + 1
    flat = np.bincount(b * n_classes + y, minlength=(int(b.max()) + 1) * n_classes)
    return flat.reshape(-1, n_classes)


def _expected_info_of_table(table: np.ndarray) -> float:
    total = table.sum()
    info = 0.0
    for row in table:
        size = row.sum()
        if size:
            info += (size / total) * _entropy_of_counts(row)
    return float(info)


def _gain_of_table(table: np.ndarray) -> float:
    gain = _entropy_of_counts(table.sum(axis=0)) - _expected_info_of_table(table)
    if gain < 0.0:
        if gain < -_NEGATIVE_GUARD:
            raise ArithmeticError(f"negative information gain {gain!r}")
        gain = 0.0
    return gain + 0.0


def expected_info(bins: Sequence, labels: Sequence) -> float:
    """Class entropy remaining after partitioning by ``bins``, weighted by bin size."""
    return _expected_info_of_table(contingency(bins, labels))


def information_gain(bins: Sequence, labels: Sequence) -> float:
    return _gain_of_table(contingency(bins, labels))


def per_class_gain(bins: Sequence, labels: Sequence, target) -> float:
    """Gain for separating ``target`` from every other label (one-vs-rest)."""
    labels = np.asarray(labels)
    return information_gain(bins, labels == target)


# ---------------------------------------------------------------------------
#  Discretization
# ---------------------------------------------------------------------------

def cut_points(column: Sequence[float], spec: DiscretizationSpec) -> np.ndarray:
    """Upper bin edges fitted on ``column``; a value v lands in bin #{cuts < v}."""
    x = np.asarray(column, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot discretize an empty column")
    lo, hi = x.min(), x.max()
    if lo == hi:
        return np.zeros(0)
    if spec.method == EQUAL_WIDTH:
        width = (hi - lo) / spec.bins
        return lo + width * np.arange(1, spec.bins)
    xs = np.sort(x)
    n = len(xs)
    # Lower order statistic at each rank quantile i/bins.
    ranks = -(-np.arange(1, spec.bins) * n // spec.bins) - 1
    cuts = np.unique(xs[ranks])
    return cuts[cuts < hi]


def apply_cut_points(column: Sequence[float], cuts: np.ndarray, spec: DiscretizationSpec) -> np.ndarray:
    x = np.asarray(column, dtype=np.float64)
    if spec.method == EQUAL_WIDTH and len(cuts):
        # Half-open [edge_i, edge_i+1) intervals with the last one closed.
        return np.searchsorted(cuts, x, side="right").astype(np.int64)
    return np.searchsorted(cuts, x, side="left").astype(np.int64)


def discretize(column: Sequence[float], kind: str = CONTINUOUS,
               spec: DiscretizationSpec = DiscretizationSpec()) -> np.ndarray:
    """Bin ids for one feature column. Discrete features use their codes directly."""
    x = np.asarray(column)
    if x.size == 0:
        raise ValueError("cannot discretize an empty column")
    if kind == DISCRETE:
        return x.astype(np.int64)
    return apply_cut_points(x, cut_points(x, spec), spec)


# ---------------------------------------------------------------------------
#  Gain table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeatureGain:
    index: int
    name: str
    gain: float
    per_class_gain: Dict[Category, float] = field(default_factory=dict)


@dataclass(frozen=True)
class GainTable:
    features: List[FeatureGain]
    class_entropy: float
    ranking: List[int]

    def gain_of(self, index: int) -> float:
        return self._by_index()[index].gain

    def _by_index(self):
        return {f.index: f for f in self.features}

    def rank_of(self, index: int) -> int:
        """1-based position of a feature in the ranking."""
        return self.ranking.index(index) + 1

    def to_dict(self) -> dict:
        return {
            "class_entropy": self.class_entropy,
            "ranking": list(self.ranking),
            "features": [
                {"index": f.index, "name": f.name, "gain": f.gain,
                 "per_class_gain": {c.label: g for c, g in f.per_class_gain.items()}}
                for f in self.features
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GainTable":
        feats = [FeatureGain(f["index"], f["name"], f["gain"],
                             {Category.parse(c): g for c, g in f["per_class_gain"].items()})
                 for f in data["features"]]
        return cls(feats, data["class_entropy"], list(data["ranking"]))


def rank_features(gains: Dict[int, float]) -> List[int]:
    """Feature indices by descending gain; equal gains keep ascending index order."""
    return sorted(gains, key=lambda i: (-gains[i], i))


def _feature_gain(train: Dataset, index: int, spec: DiscretizationSpec) -> FeatureGain:
    feature = train.schema[index]
    bins = discretize(train.values[:, index - 1], feature.kind, spec)
    per_class = {c: per_class_gain(bins, train.labels, int(c)) for c in Category}
    return FeatureGain(index, feature.name, information_gain(bins, train.labels), per_class)


def build_gain_table(train: Dataset, spec: DiscretizationSpec = DiscretizationSpec(),
                     threads: int = 1) -> GainTable:
    """Score every feature of ``train`` by information gain and rank them."""
    if len(train) < 2:
        raise ValueError("need at least 2 rows to rank features")
    indices = train.schema.indices
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            features = list(pool.map(lambda i: _feature_gain(train, i, spec), indices))
    else:
        features = [_feature_gain(train, i, spec) for i in indices]
    ranking = rank_features({f.index: f.gain for f in features})
    return GainTable(features, class_entropy(train.labels), ranking)


# ---------------------------------------------------------------------------
#  CSV form
# ---------------------------------------------------------------------------

GAIN_COLUMNS = ["index", "name", "rank", "gain"] + [f"gain_{c.label}" for c in Category]


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _gain_rows(gains: GainTable, order: Sequence[int]):
    by_index = gains._by_index()
    for i in order:
        f = by_index[i]
        yield ([f.index, f.name, gains.rank_of(i), _fmt(f.gain)]
               + [_fmt(f.per_class_gain.get(c, 0.0)) for c in Category])


def write_gain_csv(gains: GainTable, sink, by_rank: bool = False):
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="") as fh:
            return write_gain_csv(gains, fh, by_rank)
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(GAIN_COLUMNS)
    order = gains.ranking if by_rank else sorted(f.index for f in gains.features)
    writer.writerows(_gain_rows(gains, order))


def read_gain_csv(source, class_entropy_value: float = float("nan")) -> GainTable:
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_gain_csv(fh, class_entropy_value)
    reader = csv.DictReader(source)
    feats, ranks = [], {}
    for rec in reader:
        index = int(rec["index"])
        per_class = {c: float(rec[f"gain_{c.label}"]) for c in Category}
        feats.append(FeatureGain(index, rec["name"], float(rec["gain"]), per_class))
        ranks[index] = int(rec["rank"])
    feats.sort(key=lambda f: f.index)
    return GainTable(feats, class_entropy_value, sorted(ranks, key=ranks.get))
