"""
Gain-ordered sequential forward selection.

The search seeds the subset with the top-ranked feature, then walks the rest
of the ranking once, keeping a candidate only when KNN accuracy on the
evaluation split strictly beats the best accuracy so far.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dataset import Category, Dataset, RANDOM_SPLIT, SplitSpec, split
from .entropy import GainTable
from .knn import EvaluationReport, KnnConfig, evaluate

log = logging.getLogger(__name__)

DESCENDING = "descending"
ASCENDING = "ascending"


@dataclass(frozen=True)
class WrapperConfig:
    knn: KnnConfig = KnnConfig()
    max_features: Optional[int] = None
    epsilon: float = 0.0
    holdout_fraction: float = 0.3
    seed: int = 0
    order: str = DESCENDING
    patience: Optional[int] = None

    def __post_init__(self):
        if self.order not in (DESCENDING, ASCENDING):
            raise ValueError(f"unknown order {self.order!r}")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be at least 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        if self.patience is not None and self.patience < 1:
            raise ValueError("patience must be at least 1")

    def to_dict(self):
        d = asdict(self)
        d["knn"] = self.knn.to_dict()
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["knn"] = KnnConfig.from_dict(data.get("knn", {}))
        return cls(**data)


@dataclass(frozen=True)
class Step:
    candidate: int
    subset_before: List[int]
    accuracy_before: float
    accuracy_after: float
    accepted: bool


@dataclass
class SelectionTrace:
    seed_feature: int
    seed_accuracy: float
    steps: List[Step]
    final_subset: List[int]
    final_accuracy: float
    warnings: List[str] = field(default_factory=list)

    @property
    def accepted(self) -> List[Step]:
        return [s for s in self.steps if s.accepted]

    def subset_text(self) -> str:
        """Selected features as a comma-separated list in ascending index order."""
        return ",".join(str(i) for i in sorted(self.final_subset))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data) -> "SelectionTrace":
        data = dict(data)
        data["steps"] = [Step(**s) for s in data["steps"]]
        return cls(**data)

    def log_lines(self) -> List[str]:
        lines = [f"seed feature {self.seed_feature}: accuracy {self.seed_accuracy:.6f}"]
        for s in self.steps:
            verdict = "accept" if s.accepted else "reject"
            lines.append(f"try {s.candidate:>2} on {{{','.join(map(str, s.subset_before))}}}: "
                         f"{s.accuracy_before:.6f} -> {s.accuracy_after:.6f} {verdict}")
        lines.append(f"final subset {{{self.subset_text()}}}: accuracy {self.final_accuracy:.6f}")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return lines


def holdout(train: Dataset, cfg: WrapperConfig) -> Tuple[Dataset, Dataset]:
    """Split the training data into a KNN reference part and an evaluation part."""
    spec = SplitSpec(RANDOM_SPLIT, 1.0 - cfg.holdout_fraction, cfg.seed)
    return split(train, spec)


def search_order(gains: GainTable, order: str = DESCENDING) -> List[int]:
    if order == DESCENDING:
        return list(gains.ranking)
    # Ascending gain; equal gains still by ascending index.
    return sorted(gains.ranking, key=lambda i: (gains.gain_of(i), i))


def _missing_classes(reference: Dataset, evaluation: Dataset) -> List[str]:
    present = set(np.unique(evaluation.labels).tolist())
    return [Category(c).label for c in np.unique(reference.labels).tolist() if c not in present]


def select_features(train: Dataset, gains: GainTable, cfg: WrapperConfig = WrapperConfig(),
                    validation: Optional[Dataset] = None) -> SelectionTrace:
    """Run the forward search.

    With ``validation`` given, candidates are scored by KNN fitted on all of
    ``train`` and evaluated on ``validation``; otherwise ``train`` is split
    into reference and holdout parts by ``cfg``.
    """
    if not gains.ranking:
        raise ValueError("empty gain table")
    if sorted(gains.ranking) != train.schema.indices:
        raise ValueError("gain table does not cover the dataset's features")
    reference, evaluation = (train, validation) if validation is not None else holdout(train, cfg)

    warnings = []
    missing = _missing_classes(reference, evaluation)
    if missing:
        warnings.append(f"evaluation split lacks classes present in training: {', '.join(missing)}")
        log.warning(warnings[-1])

    order = search_order(gains, cfg.order)
    subset = [order[0]]
    best = evaluate(reference, evaluation, subset, cfg.knn).accuracy
    seed_accuracy = best
    steps = []
    misses = 0
    for candidate in order[1:]:
        if cfg.max_features is not None and len(subset) >= cfg.max_features:
            break
        if cfg.patience is not None and misses >= cfg.patience:
            break
        acc = evaluate(reference, evaluation, subset + [candidate], cfg.knn).accuracy
        accepted = acc > best + cfg.epsilon
        steps.append(Step(candidate, list(subset), best, acc, accepted))
        if accepted:
            subset.append(candidate)
            best = acc
            misses = 0
        else:
            misses += 1
    return SelectionTrace(order[0], seed_accuracy, steps, subset, best, warnings)


def replay(trace: SelectionTrace, reference: Dataset, evaluation: Dataset,
           knn: KnnConfig) -> List[float]:
    """Recompute the seed accuracy and every step's accuracy_after from scratch."""
    out = [evaluate(reference, evaluation, [trace.seed_feature], knn).accuracy]
    for s in trace.steps:
        out.append(evaluate(reference, evaluation, s.subset_before + [s.candidate], knn).accuracy)
    return out


@dataclass
class Comparison:
    full: EvaluationReport
    selected: EvaluationReport

    @property
    def difference(self) -> float:
        return self.selected.accuracy - self.full.accuracy

    def to_dict(self, timing: bool = True) -> dict:
        return {"full": self.full.to_dict(timing), "selected": self.selected.to_dict(timing),
                "difference": self.difference}


def compare_full_vs_selected(train: Dataset, test: Dataset, trace: SelectionTrace,
                             cfg: WrapperConfig = WrapperConfig()) -> Comparison:
    """KNN accuracy on ``test`` using every feature versus the selected subset."""
    full = evaluate(train, test, train.schema.indices, cfg.knn)
    selected = evaluate(train, test, sorted(trace.final_subset), cfg.knn)
    return Comparison(full, selected)
