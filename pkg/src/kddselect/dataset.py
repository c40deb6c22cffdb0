"""
Loading, encoding and partitioning of KDD Cup 99 connection records.

Records are 41 features followed by an attack label. Symbolic features are
coded as integers in first-seen order; attack names are folded into the five
categories Normal, DOS, Probe, R2L and U2R.
"""

import csv
import enum
import io
import logging
import os
from dataclasses import dataclass
from importlib import resources
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)


class Category(enum.IntEnum):
    """Attack categories. The integer order doubles as the final vote tie-break."""

    NORMAL = 0
    DOS = 1
    PROBE = 2
    R2L = 3
    U2R = 4

    @property
    def label(self) -> str:
        return _CATEGORY_LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "Category":
        key = text.strip().lower()
        try:
            return _CATEGORY_ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown attack category {text!r}") from None


_CATEGORY_LABELS = {
    Category.NORMAL: "Normal",
    Category.DOS: "DOS",
    Category.PROBE: "Probe",
    Category.R2L: "R2L",
    Category.U2R: "U2R",
}

_CATEGORY_ALIASES = {
    "normal": Category.NORMAL,
    "dos": Category.DOS,
    "probe": Category.PROBE,
    "prob": Category.PROBE,
    "probing": Category.PROBE,
    "r2l": Category.R2L,
    "u2r": Category.U2R,
}

N_CATEGORIES = len(Category)

# Attack names of the 10% training file and their categories.
ATTACK_CATEGORIES: Dict[str, Category] = {
    "normal": Category.NORMAL,
    "smurf": Category.DOS,
    "neptune": Category.DOS,
    "back": Category.DOS,
    "teardrop": Category.DOS,
    "pod": Category.DOS,
    "land": Category.DOS,
    "satan": Category.PROBE,
    "ipsweep": Category.PROBE,
    "portsweep": Category.PROBE,
    "nmap": Category.PROBE,
    "warezclient": Category.R2L,
    "guess_passwd": Category.R2L,
    "warezmaster": Category.R2L,
    "imap": Category.R2L,
    "ftp_write": Category.R2L,
    "multihop": Category.R2L,
    "phf": Category.R2L,
    "spy": Category.R2L,
    "buffer_overflow": Category.U2R,
    "rootkit": Category.U2R,
    "loadmodule": Category.U2R,
    "perl": Category.U2R,
}


class UnknownLabelError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


# ---------------------------------------------------------------------------
#  Schema
# ---------------------------------------------------------------------------

CONTINUOUS = "continuous"
DISCRETE = "discrete"
_KIND_CODES = {CONTINUOUS: "C", DISCRETE: "D"}
_KIND_FROM_CODE = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class Feature:
    index: int  # 1-based column position
    name: str
    kind: str


@dataclass(frozen=True)
class FeatureSchema:
    features: Tuple[Feature, ...]

    def __post_init__(self):
        indices = [f.index for f in self.features]
        if indices != list(range(1, len(indices) + 1)):
            raise ValueError("feature indices must be contiguous and start at 1")
        for f in self.features:
            if f.kind not in _KIND_CODES:
                raise ValueError(f"feature {f.index}: unknown kind {f.kind!r}")

    def __len__(self):
        return len(self.features)

    def __getitem__(self, index: int) -> Feature:
        """Look up a feature by its 1-based index."""
        if not 1 <= index <= len(self.features):
            raise KeyError(index)
        return self.features[index - 1]

    @property
    def label_position(self) -> int:
        return len(self.features) + 1

    @property
    def indices(self) -> List[int]:
        return [f.index for f in self.features]

    @property
    def discrete_indices(self) -> List[int]:
        return [f.index for f in self.features if f.kind == DISCRETE]

    @classmethod
    def build(cls, names: Sequence[str], kinds: Sequence[str]) -> "FeatureSchema":
        return cls(tuple(Feature(i + 1, n, k) for i, (n, k) in enumerate(zip(names, kinds))))


KDD_FEATURE_NAMES = [
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
    "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate",
    "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate",
    "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
]
KDD_DISCRETE = (2, 3, 4, 7, 12, 21, 22)

KDD_SCHEMA = FeatureSchema.build(
    KDD_FEATURE_NAMES,
    [DISCRETE if i in KDD_DISCRETE else CONTINUOUS for i in range(1, 42)],
)


# ---------------------------------------------------------------------------
#  Symbolic feature coding
# ---------------------------------------------------------------------------

class CategoryDictionary:
    """Per-feature token -> integer code tables, codes assigned in first-seen order.

    Parsing a second file with the dictionary returned from the first keeps
    every existing code and appends codes for new tokens only.
    """

    def __init__(self, tables: Optional[Mapping[int, Mapping[str, int]]] = None):
        self._tables: Dict[int, Dict[str, int]] = {}
        for feature, table in (tables or {}).items():
            self._tables[int(feature)] = dict(table)
        self._reverse = {f: {c: t for t, c in tbl.items()} for f, tbl in self._tables.items()}
        for f, tbl in self._tables.items():
            if len(self._reverse[f]) != len(tbl):
                raise ValueError(f"feature {f}: codes are not unique")

    def copy(self) -> "CategoryDictionary":
        return CategoryDictionary(self._tables)

    def encode(self, feature: int, token: str) -> int:
        table = self._tables.setdefault(feature, {})
        code = table.get(token)
        if code is None:
            code = len(table)
            table[token] = code
            self._reverse.setdefault(feature, {})[code] = token
        return code

    def lookup(self, feature: int, token: str) -> int:
        return self._tables[feature][token]

    def decode(self, feature: int, code: int) -> str:
        return self._reverse[feature][int(code)]

    def tokens(self, feature: int) -> List[str]:
        return list(self._tables.get(feature, {}))

    def to_dict(self) -> Dict[str, Dict[str, int]]:
        return {str(f): dict(t) for f, t in sorted(self._tables.items())}

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, int]]) -> "CategoryDictionary":
        return cls({int(f): t for f, t in data.items()})

    def __eq__(self, other):
        return isinstance(other, CategoryDictionary) and self._tables == other._tables

    def __repr__(self):
        sizes = {f: len(t) for f, t in sorted(self._tables.items())}
        return f"CategoryDictionary({sizes})"


# ---------------------------------------------------------------------------
#  Labels
# ---------------------------------------------------------------------------

def normalize_label(name: str) -> str:
    name = name.strip()
    if name.endswith("."):
        name = name[:-1]
    return name.lower()


def map_attack_label(name: str, extension: Optional[Mapping[str, Category]] = None,
                     fallback: Optional[Category] = None) -> Category:
    """Return the category of an attack name.

    Unknown names raise UnknownLabelError unless ``fallback`` is given
    (permissive mode).
    """
    key = normalize_label(name)
    category = ATTACK_CATEGORIES.get(key)
    if category is None and extension:
        category = extension.get(key)
    if category is None:
        if fallback is None:
            raise UnknownLabelError(f"unknown attack label {name!r}")
        return Category(fallback)
    return category


def read_extension_table(source) -> Dict[str, Category]:
    """Read "attack_name,category" pairs; '#' starts a comment line."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_extension_table(fh)
    table = {}
    for lineno, line in enumerate(source, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ParseError("expected 'attack_name,category'", getattr(source, "name", None), lineno)
        table[normalize_label(parts[0])] = Category.parse(parts[1])
    return table


def corrected_extension() -> Dict[str, Category]:
    """Bundled table for attack names that only occur in the corrected test file."""
    text = resources.files("kddselect").joinpath("data/corrected_extension.txt").read_text()
    return read_extension_table(io.StringIO(text))


# ---------------------------------------------------------------------------
#  Dataset
# ---------------------------------------------------------------------------

def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded records.

    ``row_ids`` is the canonical row key (position in the source file); it is
    carried through sampling and splitting and used for deterministic
    neighbour tie-breaking.
    """

    values: np.ndarray
    labels: np.ndarray
    raw_labels: np.ndarray
    schema: FeatureSchema = KDD_SCHEMA
    row_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.size == 0:
            values = values.reshape(0, len(self.schema))
        if values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        labels = np.asarray(self.labels, dtype=np.int64)
        raw = np.asarray(self.raw_labels, dtype=object)
        n = values.shape[0]
        if values.shape[1] != len(self.schema):
            raise ValueError(f"expected {len(self.schema)} columns, got {values.shape[1]}")
        if len(labels) != n or len(raw) != n:
            raise ValueError("values, labels and raw_labels differ in length")
        row_ids = np.arange(n, dtype=np.int64) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        if len(row_ids) != n:
            raise ValueError("row_ids length mismatch")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "raw_labels", _frozen(raw))
        object.__setattr__(self, "row_ids", _frozen(row_ids))

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.values[rows], self.labels[rows], self.raw_labels[rows],
                       self.schema, self.row_ids[rows])

    def columns(self, subset: Sequence[int]) -> np.ndarray:
        """Values of the given 1-based features, in the given order."""
        return self.values[:, np.asarray(subset, dtype=np.int64) - 1]

    def content_equal(self, other: "Dataset") -> bool:
        return (self.schema == other.schema
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.labels, other.labels)
                and list(self.raw_labels) == list(other.raw_labels))

    def category_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=N_CATEGORIES)


def empty_dataset(schema: FeatureSchema = KDD_SCHEMA) -> Dataset:
    return Dataset(np.zeros((0, len(schema))), np.zeros(0, dtype=np.int64),
                   np.zeros(0, dtype=object), schema)


def parse_kdd_lines(lines: Iterable[str], schema: FeatureSchema = KDD_SCHEMA,
                    dictionary: Optional[CategoryDictionary] = None,
                    extension: Optional[Mapping[str, Category]] = None,
                    fallback: Optional[Category] = None,
                    source: Optional[str] = None) -> Tuple[Dataset, CategoryDictionary]:
    """Parse KDD-format lines. See :func:`parse_kdd_file`."""
    dictionary = CategoryDictionary() if dictionary is None else dictionary.copy()
    n_fields = len(schema) + 1
    discrete = [f.kind == DISCRETE for f in schema.features]
    rows, labels, raw = [], [], []
    unknown = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != n_fields:
            raise ParseError(f"expected {n_fields} fields, got {len(fields)}", source, lineno)
        row = [0.0] * len(schema)
        for j, is_discrete in enumerate(discrete):
            token = fields[j].strip()
            if is_discrete:
                row[j] = float(dictionary.encode(j + 1, token))
            else:
                try:
                    row[j] = float(token)
                except ValueError:
                    raise ParseError(
                        f"feature {j + 1} ({schema.features[j].name}): not a number: {token!r}",
                        source, lineno) from None
        name = normalize_label(fields[-1])
        try:
            category = map_attack_label(name, extension, fallback)
        except UnknownLabelError as exc:
            raise UnknownLabelError(f"{source or '<input>'}:{lineno}: {exc}") from None
        if fallback is not None and name not in ATTACK_CATEGORIES and not (extension and name in extension):
            unknown[name] = unknown.get(name, 0) + 1
        rows.append(row)
        labels.append(int(category))
        raw.append(name)
    if unknown:
        log.warning("mapped unknown labels to %s: %s", Category(fallback).label, unknown)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(schema))
    return Dataset(values, np.array(labels, dtype=np.int64), np.array(raw, dtype=object), schema), dictionary


def parse_kdd_file(path, schema: FeatureSchema = KDD_SCHEMA,
                   dictionary: Optional[CategoryDictionary] = None,
                   extension: Optional[Mapping[str, Category]] = None,
                   fallback: Optional[Category] = None) -> Tuple[Dataset, CategoryDictionary]:
    """Read a comma-separated KDD file (41 features + label per line).

    Returns the dataset and the dictionary extended with any new symbolic
    tokens; the input dictionary is not modified. Pass the returned
    dictionary when parsing the test file so both share one coding.
    """
    with open(path, newline="") as fh:
        return parse_kdd_lines(fh, schema, dictionary, extension, fallback, source=str(path))


def format_number(x: float) -> str:
    """Shortest text that reads back to the same float; integral values print without '.0'."""
    if x == int(x) and abs(x) < 2 ** 53 and not (x == 0 and np.signbit(x)):
        return str(int(x))
    return repr(float(x))


def write_kdd_file(ds: Dataset, path, dictionary: CategoryDictionary):
    """Write records back in the raw KDD layout, decoding symbolic codes."""
    discrete = set(ds.schema.discrete_indices)
    with open(path, "w", newline="") as fh:
        for row, name in zip(ds.values, ds.raw_labels):
            fields = [dictionary.decode(j, row[j - 1]) if j in discrete else format_number(row[j - 1])
                      for j in range(1, ds.n_features + 1)]
            fields.append(f"{name}.")
            fh.write(",".join(fields) + "\n")


# Canonical encoded form: one header line of "name:C|D" entries followed by
# the category and raw label columns, then one numeric row per record.

def write_dataset(ds: Dataset, sink):
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="") as fh:
            return write_dataset(ds, fh)
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow([f"{f.name}:{_KIND_CODES[f.kind]}" for f in ds.schema.features] + ["category", "raw_label"])
    for row, cat, name in zip(ds.values, ds.labels, ds.raw_labels):
        writer.writerow([format_number(v) for v in row] + [Category(cat).label, name])


def is_canonical_header(line: str) -> bool:
    first = line.split(",", 1)[0]
    return first.endswith((":C", ":D"))


def read_dataset(source) -> Dataset:
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_dataset(fh)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("missing header", getattr(source, "name", None)) from None
    if header[-2:] != ["category", "raw_label"]:
        raise ParseError("not a canonical dataset file", getattr(source, "name", None), 1)
    names, kinds = [], []
    for entry in header[:-2]:
        name, _, code = entry.rpartition(":")
        if code not in _KIND_FROM_CODE:
            raise ParseError(f"bad header entry {entry!r}", getattr(source, "name", None), 1)
        names.append(name)
        kinds.append(_KIND_FROM_CODE[code])
    schema = FeatureSchema.build(names, kinds)
    if schema == KDD_SCHEMA:
        schema = KDD_SCHEMA
    rows, labels, raw = [], [], []
    for lineno, rec in enumerate(reader, 2):
        if not rec:
            continue
        if len(rec) != len(names) + 2:
            raise ParseError(f"expected {len(names) + 2} fields, got {len(rec)}",
                             getattr(source, "name", None), lineno)
        try:
            rows.append([float(v) for v in rec[:-2]])
        except ValueError as exc:
            raise ParseError(str(exc), getattr(source, "name", None), lineno) from None
        labels.append(int(Category.parse(rec[-2])))
        raw.append(rec[-1])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return Dataset(values, np.array(labels, dtype=np.int64), np.array(raw, dtype=object), schema)


# ---------------------------------------------------------------------------
#  Sampling and splitting
# ---------------------------------------------------------------------------

def sample(ds: Dataset, n: int, seed: int) -> Dataset:
    """Uniform sample of ``n`` rows without replacement, kept in source order."""
    if n < 1:
        raise ValueError("sample size must be positive")
    if n > len(ds):
        raise ValueError(f"cannot sample {n} rows from a dataset of {len(ds)}")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(len(ds), size=n, replace=False))
    return ds.take(rows)


TWO_FILES = "two-files"
RANDOM_SPLIT = "random-split"


@dataclass(frozen=True)
class SplitSpec:
    mode: str = RANDOM_SPLIT
    train_fraction: float = 0.7
    seed: int = 0
    sample_size: Optional[int] = None

    def __post_init__(self):
        if self.mode not in (TWO_FILES, RANDOM_SPLIT):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.mode == RANDOM_SPLIT and not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def split(ds: Dataset, spec: SplitSpec, test: Optional[Dataset] = None) -> Tuple[Dataset, Dataset]:
    """Partition ``ds`` into train and test.

    In two-files mode ``test`` is the separately parsed test file and is
    returned as-is (after the optional sample cap, applied to each side).
    """
    if spec.mode == TWO_FILES:
        if test is None:
            raise ValueError("two-files mode needs a test dataset")
        train = ds
        if spec.sample_size is not None:
            train = sample(train, min(spec.sample_size, len(train)), spec.seed)
            test = sample(test, min(spec.sample_size, len(test)), spec.seed + 1)
        return train, test
    if test is not None:
        raise ValueError("random-split mode takes a single dataset")
    if spec.sample_size is not None:
        ds = sample(ds, spec.sample_size, spec.seed)
    n_train = int(round(spec.train_fraction * len(ds)))
    if n_train == 0 or n_train == len(ds):
        raise ValueError(f"train_fraction {spec.train_fraction} leaves one side of {len(ds)} rows empty")
    order = np.random.default_rng(spec.seed).permutation(len(ds))
    return ds.take(np.sort(order[:n_train])), ds.take(np.sort(order[n_train:]))


# ---------------------------------------------------------------------------
#  Scaling
# ---------------------------------------------------------------------------

def min_max_stats(ds: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    if len(ds) == 0:
        raise ValueError("min/max of an empty dataset")
    return ds.values.min(axis=0), ds.values.max(axis=0)


def normalize(ds: Dataset, stats: Tuple[np.ndarray, np.ndarray]) -> Dataset:
    """Min-max scale with externally supplied (train) statistics; constant columns map to 0."""
    lo, hi = stats
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    values = np.where(span > 0, (ds.values - lo) / safe, 0.0)
    return Dataset(values, ds.labels, ds.raw_labels, ds.schema, ds.row_ids)
