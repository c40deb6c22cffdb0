import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kddselect.dataset import CONTINUOUS, Dataset, FeatureSchema

DATA = Path(__file__).parent / "data"


@pytest.fixture
def train_path():
    return DATA / "kdd_train_small.txt"


@pytest.fixture
def test_path():
    return DATA / "kdd_test_small.txt"


def make_dataset(values, labels, raw=None, kinds=None):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    m = values.shape[1]
    schema = FeatureSchema.build([f"f{i}" for i in range(1, m + 1)], kinds or [CONTINUOUS] * m)
    labels = np.asarray(labels)
    raw = np.array(["x"] * len(labels), dtype=object) if raw is None else raw
    return Dataset(values, labels, raw, schema)


@pytest.fixture
def dataset_factory():
    return make_dataset


def pytest_addoption(parser):
    parser.addoption("--kdd-train", default=os.environ.get("KDDSELECT_TRAIN"),
                     help="10% KDD Cup 99 training file; enables the real-data checks")
    parser.addoption("--kdd-test", default=os.environ.get("KDDSELECT_TEST"),
                     help="corrected KDD Cup 99 test file (optional)")


@pytest.fixture
def kdd_files(request):
    """Real KDD Cup 99 files, when supplied on the command line or through the environment."""
    train = request.config.getoption("--kdd-train")
    test = request.config.getoption("--kdd-test")
    return (Path(train) if train else None), (Path(test) if test else None)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(results):
        title, status, detail = results[cid]
        terminalreporter.write_line(f"{status:4} C{cid} {title}: {detail}")
