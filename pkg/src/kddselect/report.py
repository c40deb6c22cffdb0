"""
Experiment orchestration and output files, plus a synthetic record generator
that stands in for the (non-redistributable) KDD corpus in tests.
"""

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .dataset import (
    CONTINUOUS, DISCRETE, KDD_SCHEMA, RANDOM_SPLIT, Category, CategoryDictionary,
    Dataset, FeatureSchema, SplitSpec, min_max_stats, normalize, sample, split,
)
from .entropy import DiscretizationSpec, GainTable, build_gain_table, write_gain_csv
from .knn import KnnConfig
from .wrapper import WrapperConfig, compare_full_vs_selected, select_features

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_SIZES = (1000, 10000, 50000, 100000, 150000, 250000)

EVAL_HOLDOUT = "holdout"
EVAL_TEST = "test"
EVAL_TRAIN = "train"
EVAL_MODES = (EVAL_HOLDOUT, EVAL_TEST, EVAL_TRAIN)


# ---------------------------------------------------------------------------
#  Synthetic data
# ---------------------------------------------------------------------------

# Class-mean pattern for informative features: no single feature separates
# all five categories, the three together do.
_PATTERN = np.array([
    [0, 0, 0],  # Normal
    [1, 0, 0],  # DOS
    [0, 1, 0],  # Probe
    [0, 0, 1],  # R2L
    [1, 1, 1],  # U2R
], dtype=np.float64)

_RAW_NAMES = {
    Category.NORMAL: "normal",
    Category.DOS: "smurf",
    Category.PROBE: "satan",
    Category.R2L: "guess_passwd",
    Category.U2R: "buffer_overflow",
}

# Token vocabularies for the discrete KDD features in the 41-column layout.
_KDD_TOKENS = {
    2: ["tcp", "udp", "icmp"],
    3: ["http", "smtp", "ftp_data", "private", "ecr_i", "domain_u", "other", "telnet"],
    4: ["SF", "S0", "REJ", "RSTR", "SH"],
    7: ["0", "1"],
    12: ["0", "1"],
    21: ["0", "1"],
    22: ["0", "1"],
}
# Informative columns in the KDD layout (all continuous).
_KDD_INFORMATIVE = (5, 23, 33, 24, 6, 32, 36, 1, 10, 25)
# Held at zero, as in the real corpus.
_KDD_CONSTANT = 20


@dataclass(frozen=True)
class SyntheticSpec:
    rows: int
    informative_features: int = 3
    noise_features: int = 7
    class_proportions: Sequence[float] = (0.2, 0.2, 0.2, 0.2, 0.2)
    seed: int = 0
    separation: float = 4.0
    noise_scale: float = 2.0
    kdd_layout: bool = False

    def __post_init__(self):
        object.__setattr__(self, "class_proportions", tuple(float(p) for p in self.class_proportions))
        p = np.asarray(self.class_proportions)
        if len(p) != len(Category) or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"class proportions must be {len(Category)} non-negative values summing to 1")
        if self.rows < 1:
            raise ValueError("rows must be positive")
        if self.informative_features < 0 or self.noise_features < 0:
            raise ValueError("feature counts must be non-negative")
        if self.kdd_layout:
            if self.informative_features + self.noise_features != len(KDD_SCHEMA):
                raise ValueError(f"the KDD layout needs {len(KDD_SCHEMA)} features in total")
            if self.informative_features > len(_KDD_INFORMATIVE):
                raise ValueError(f"the KDD layout supports at most {len(_KDD_INFORMATIVE)} informative features")
        elif self.informative_features + self.noise_features < 1:
            raise ValueError("need at least one feature")

    def informative_indices(self) -> List[int]:
        if self.kdd_layout:
            return sorted(_KDD_INFORMATIVE[:self.informative_features])
        return list(range(1, self.informative_features + 1))


def _class_counts(n: int, proportions: Sequence[float]) -> np.ndarray:
    """Largest-remainder allocation of n rows to classes."""
    exact = np.asarray(proportions) * n
    counts = np.floor(exact).astype(np.int64)
    rest = n - counts.sum()
    order = np.lexsort((np.arange(len(exact)), -(exact - counts)))
    counts[order[:rest]] += 1
    return counts


def synthetic_dictionary() -> CategoryDictionary:
    return CategoryDictionary({f: {t: i for i, t in enumerate(toks)} for f, toks in _KDD_TOKENS.items()})


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Labelled records whose informative features depend on the class and whose noise features do not."""
    rng = np.random.default_rng(spec.seed)
    counts = _class_counts(spec.rows, spec.class_proportions)
    labels = rng.permutation(np.repeat(np.arange(len(Category)), counts))
    n = spec.rows

    if spec.kdd_layout:
        schema = KDD_SCHEMA
    else:
        m = spec.informative_features + spec.noise_features
        schema = FeatureSchema.build([f"f{i}" for i in range(1, m + 1)], [CONTINUOUS] * m)
    informative = spec.informative_indices()

    values = np.zeros((n, len(schema)))
    for slot, index in enumerate(informative):
        means = spec.separation * _PATTERN[labels, slot % 3] * (1 + slot // 3)
        values[:, index - 1] = means + rng.standard_normal(n)
    for feature in schema.features:
        if feature.index in informative:
            continue
        col = feature.index - 1
        if spec.kdd_layout and feature.index == _KDD_CONSTANT:
            continue
        if feature.kind == DISCRETE:
            values[:, col] = rng.integers(0, len(_KDD_TOKENS[feature.index]), n)
        else:
            values[:, col] = spec.separation / 2 + spec.noise_scale * rng.standard_normal(n)
    raw = np.array([_RAW_NAMES[Category(c)] for c in labels], dtype=object)
    return Dataset(values, labels, raw, schema)


# ---------------------------------------------------------------------------
#  Experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentPlan:
    sizes: Sequence[int] = DEFAULT_SIZES
    seeds: Sequence[int] = (0,)
    discretization: DiscretizationSpec = DiscretizationSpec()
    wrapper: WrapperConfig = WrapperConfig()
    # Used when no separate test set is given: fraction of each sample kept for training.
    train_fraction: float = 0.7
    # Rows drawn from a separate test set per cell; None means the cell's size.
    test_size: Optional[int] = None
    eval_mode: str = EVAL_HOLDOUT
    normalize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.sizes or min(self.sizes) < 2:
            raise ValueError("sizes must be a non-empty list of integers >= 2")
        if not self.seeds or min(self.seeds) < 0:
            raise ValueError("seeds must be a non-empty list of non-negative integers")
        if self.eval_mode not in EVAL_MODES:
            raise ValueError(f"unknown eval mode {self.eval_mode!r}")

    @property
    def knn(self) -> KnnConfig:
        return self.wrapper.knn

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        d["seeds"] = list(self.seeds)
        d["wrapper"] = self.wrapper.to_dict()
        return d

    @classmethod
    def from_dict(cls, data) -> "ExperimentPlan":
        data = dict(data)
        data["discretization"] = DiscretizationSpec(**data.get("discretization", {}))
        data["wrapper"] = WrapperConfig.from_dict(data.get("wrapper", {}))
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPlan":
        return cls.from_dict(json.loads(text))


def cell_seeds(seed: int, size: int) -> List[int]:
    """Independent sub-seeds (sample, test draw, wrapper holdout) for one grid cell."""
    return [int(s) for s in np.random.SeedSequence([seed, size]).generate_state(3)]


def run_cell(plan: ExperimentPlan, size: int, seed: int, train: Dataset,
             test: Optional[Dataset] = None, timings: bool = False) -> dict:
    s_sample, s_test, s_wrap = cell_seeds(seed, size)
    cell = {"size": size, "seed": seed}
    started = time.perf_counter()
    try:
        part = sample(train, size, s_sample)
        if test is None:
            tr, te = split(part, SplitSpec(RANDOM_SPLIT, plan.train_fraction, s_test))
        else:
            tr = part
            te = sample(test, min(plan.test_size or size, len(test)), s_test)
        if plan.normalize:
            stats = min_max_stats(tr)
            tr, te = normalize(tr, stats), normalize(te, stats)
        gains = build_gain_table(tr, plan.discretization, plan.knn.threads)
        wcfg = replace(plan.wrapper, seed=s_wrap)
        validation = {EVAL_TEST: te, EVAL_TRAIN: tr}.get(plan.eval_mode)
        trace = select_features(tr, gains, wcfg, validation)
        comparison = compare_full_vs_selected(tr, te, trace, wcfg)
    except Exception as exc:  # one failed cell must not sink the grid
        log.error("cell size=%d seed=%d failed: %s", size, seed, exc)
        cell.update(status="error", error=f"{type(exc).__name__}: {exc}")
        return cell
    cell.update(
        status="ok",
        n_train=len(tr),
        n_test=len(te),
        ranking=list(gains.ranking),
        selected_subset=sorted(trace.final_subset),
        wrapper_accuracy=trace.final_accuracy,
        accuracy_full=comparison.full.accuracy,
        accuracy_selected=comparison.selected.accuracy,
        trace=trace.to_dict(),
    )
    if timings:
        cell["seconds"] = time.perf_counter() - started
    return cell


def run_experiment(plan: ExperimentPlan, train: Dataset, test: Optional[Dataset] = None,
                   timings: bool = False) -> dict:
    """Sample, rank, select and compare for every (size, seed) cell of the plan.

    Wall-clock times are left out unless ``timings`` is set, so that the
    document is a pure function of its inputs.
    """
    cells = [run_cell(plan, size, seed, train, test, timings)
             for size in plan.sizes for seed in plan.seeds]
    return {"schema_version": SCHEMA_VERSION, "plan": plan.to_dict(), "cells": cells}


# ---------------------------------------------------------------------------
#  Emitters
# ---------------------------------------------------------------------------

def percent(x: float) -> str:
    return f"{100 * x:.2f}%"


def _open(sink):
    if isinstance(sink, (str, os.PathLike)):
        return open(sink, "w", newline="")
    return None


def emit_gain_report(gains: GainTable, sink, ranking_sink=None):
    """Gain CSV in feature order; optionally a second copy in rank order."""
    write_gain_csv(gains, sink)
    if ranking_sink is not None:
        write_gain_csv(gains, ranking_sink, by_rank=True)


COMPARISON_HEADER = ["size", "seed", "subset", "acc_full", "acc_selected"]


def _ok_cells(doc: dict):
    return sorted((c for c in doc["cells"] if c.get("status") == "ok"),
                  key=lambda c: (c["size"], c["seed"]))


def emit_comparison(doc: dict, sink, plot_sink=None):
    """Comparison CSV (one row per cell, ascending size) and whitespace plot data
    (one line per size, accuracies averaged over seeds, in percent)."""
    fh = _open(sink)
    try:
        writer = csv.writer(fh or sink, lineterminator="\n")
        writer.writerow(COMPARISON_HEADER)
        for c in _ok_cells(doc):
            writer.writerow([c["size"], c["seed"], ",".join(map(str, c["selected_subset"])),
                             percent(c["accuracy_full"]), percent(c["accuracy_selected"])])
    finally:
        if fh:
            fh.close()
    if plot_sink is not None:
        write_plot_data(doc, plot_sink)


def write_plot_data(doc: dict, sink):
    fh = _open(sink)
    out = fh or sink
    try:
        out.write("# size acc_full acc_selected\n")
        by_size = {}
        for c in _ok_cells(doc):
            by_size.setdefault(c["size"], []).append((c["accuracy_full"], c["accuracy_selected"]))
        for size, pairs in sorted(by_size.items()):
            full = sum(p[0] for p in pairs) / len(pairs)
            sel = sum(p[1] for p in pairs) / len(pairs)
            out.write(f"{size} {100 * full:.2f} {100 * sel:.2f}\n")
    finally:
        if fh:
            fh.close()


def write_document(doc: dict, sink):
    fh = _open(sink)
    try:
        json.dump(doc, fh or sink, indent=2, sort_keys=True)
        (fh or sink).write("\n")
    finally:
        if fh:
            fh.close()
