import numpy as np
import pytest

from purgelab.datakit import AttributeMeta, Dataset, make_blobs
from purgelab.learners import Model, register_learner

ACCEPTANCE_LINES: list[str] = []


@register_learner
class ConstantLearner(Model):
    """Always predicts a fixed class index (extension learner used by the tests)."""

    learner_id = "constant"
    defaults = {"label": 0}

    def _fit(self, X, y):
        pass

    def _proba(self, X):
        out = np.zeros((X.shape[0], self.n_classes))
        out[:, int(self.params["label"])] = 1.0
        return out


@register_learner
class FailingLearner(Model):
    learner_id = "failing"
    defaults = {}

    def _fit(self, X, y):
        raise RuntimeError("boom")


def numeric_dataset(X, y, name="toy", classes=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y)
    classes = classes or tuple(f"c{i}" for i in range(max(2, int(y.max()) + 1)))
    attrs = tuple(AttributeMeta(f"x{j}") for j in range(X.shape[1]))
    return Dataset(name, attrs, classes, X, y)


@pytest.fixture
def xor():
    return numeric_dataset([[0, 0], [1, 1], [0, 1], [1, 0]], [0, 0, 1, 1], "xor")


@pytest.fixture
def blobs():
    return make_blobs(3, 30, 2, 0.3, 1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
