"""Two-phase feature selection for KDD Cup 99 records: an information-gain
filter ranks the features, a KNN wrapper grows a subset in gain order."""

__version__ = "0.1.0"

from .dataset import (
    ATTACK_CATEGORIES, KDD_SCHEMA, Category, CategoryDictionary, Dataset, FeatureSchema,
    SplitSpec, map_attack_label, min_max_stats, parse_kdd_file, read_dataset, sample, split,
    write_dataset,
)
from .entropy import (
    DiscretizationSpec, GainTable, build_gain_table, class_entropy, discretize, expected_info,
    information_gain, per_class_gain,
)
from .knn import EvaluationReport, KnnConfig, distance, evaluate, predict
from .report import ExperimentPlan, SyntheticSpec, generate_synthetic, run_experiment
from .wrapper import SelectionTrace, WrapperConfig, compare_full_vs_selected, select_features

__all__ = [
    "ATTACK_CATEGORIES", "KDD_SCHEMA", "Category", "CategoryDictionary", "Dataset", "FeatureSchema",
    "SplitSpec", "map_attack_label", "min_max_stats", "parse_kdd_file", "read_dataset", "sample",
    "split", "write_dataset",
    "DiscretizationSpec", "GainTable", "build_gain_table", "class_entropy", "discretize",
    "expected_info", "information_gain", "per_class_gain",
    "EvaluationReport", "KnnConfig", "distance", "evaluate", "predict",
    "ExperimentPlan", "SyntheticSpec", "generate_synthetic", "run_experiment",
    "SelectionTrace", "WrapperConfig", "compare_full_vs_selected", "select_features",
]
