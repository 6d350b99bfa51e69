"""Learner registry, specs and the shared model surface."""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ..datakit import AttributeMeta, Dataset, Instance

_REGISTRY: dict[str, type["Model"]] = {}
_OBSERVERS: list[Callable] = []


@contextmanager
def observe(callback: Callable):
    """Instrumentation: ``callback(event, *payload)`` sees every fit, score and grid task.

    Events are ``("fit", spec, train)``, ``("score", model, test)`` and
    ``("task", dataset_name, repeat, fold, test_origin)``.
    """
    _OBSERVERS.append(callback)
    try:
        yield
    finally:
        _OBSERVERS.remove(callback)


def notify(event: str, *payload) -> None:
    for cb in _OBSERVERS:
        cb(event, *payload)


class LearnerError(RuntimeError):
    """A learner failed to fit; carries the learner label."""

    def __init__(self, learner: str, message: str, dataset: str | None = None):
        where = f" on {dataset}" if dataset else ""
        super().__init__(f"{learner}{where}: {message}")
        self.learner = learner
        self.dataset = dataset


class SchemaError(ValueError):
    pass


def register_learner(cls: type["Model"]) -> type["Model"]:
    """Class decorator adding a :class:`Model` subclass to the registry under ``cls.learner_id``."""
    if not cls.learner_id:
        raise ValueError("learner class needs a learner_id")
    _REGISTRY[cls.learner_id] = cls
    return cls


def unregister_learner(learner_id: str) -> None:
    _REGISTRY.pop(learner_id, None)


def registered_ids() -> list[str]:
    return list(_REGISTRY)


def learner_class(learner_id: str) -> type["Model"]:
    try:
        return _REGISTRY[learner_id]
    except KeyError:
        raise KeyError(f"unknown learner id {learner_id!r}") from None


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


@dataclass(frozen=True)
class LearnerSpec:
    id: str
    hyperparameters: Mapping = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        cls = learner_class(self.id)
        params = dict(self.hyperparameters)
        unknown = set(params) - set(cls.defaults)
        if unknown:
            raise ValueError(f"{self.id}: unknown hyperparameters {sorted(unknown)}")
        object.__setattr__(self, "hyperparameters", tuple(sorted(params.items())))

    @property
    def params(self) -> dict:
        merged = dict(learner_class(self.id).defaults)
        merged.update(dict(self.hyperparameters))
        return merged

    @property
    def label(self) -> str:
        if not self.hyperparameters:
            return self.id
        return self.id + ":" + ",".join(f"{k}={v}" for k, v in self.hyperparameters)

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "LearnerSpec":
        """Parse ``id`` or ``id:key=value,key=value``."""
        lid, _, rest = text.strip().partition(":")
        params = {}
        for item in filter(None, (p.strip() for p in rest.split(","))):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"hyperparameter {item!r} is not key=value")
            params[key.strip()] = _coerce(value.strip())
        return cls(lid, params, seed)


BUILTIN_IDS = ("decision-tree", "knn", "naive-bayes", "mlp", "one-rule")


def builtin_specs(seed: int = 0) -> list[LearnerSpec]:
    return [LearnerSpec(lid, {}, seed) for lid in BUILTIN_IDS]


def as_matrix(rows) -> np.ndarray:
    """Accept a Dataset, an Instance, a sequence of Instances or an array."""
    if isinstance(rows, Dataset):
        return rows.X
    if isinstance(rows, Instance):
        rows = [rows]
    if isinstance(rows, (list, tuple)) and rows and isinstance(rows[0], Instance):
        return np.array([[np.nan if v is None else v for v in r.values] for r in rows], dtype=float)
    X = np.asarray(rows, dtype=float)
    return X.reshape(1, -1) if X.ndim == 1 else X


class Model:
    """Base class for learners. Subclasses implement ``_fit`` and ``_proba``.

    A fitted model is immutable; ``predict`` is the argmax of
    ``predict_proba`` with ties going to the lowest class index.
    """

    learner_id: str = ""
    defaults: dict = {}

    def __init__(self, attributes: tuple[AttributeMeta, ...], n_classes: int, params: dict, seed: int = 0):
        self.attributes = tuple(attributes)
        self.n_classes = n_classes
        self.params = params
        self.seed = seed
        self.categorical = np.array([a.is_categorical for a in attributes], dtype=bool)
        self.spec: LearnerSpec | None = None
        self.only_class: int | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "Model":
        present = np.unique(y)
        self.only_class = int(present[0]) if present.size == 1 else None
        self._fit(X, y)
        return self

    def check_schema(self, X: np.ndarray) -> None:
        if X.ndim != 2 or X.shape[1] != len(self.attributes):
            raise SchemaError(f"expected {len(self.attributes)} attributes, got shape {X.shape}")
        for j in np.flatnonzero(self.categorical):
            col = X[:, j]
            known = col[~np.isnan(col)]
            if known.size and (known.min() < 0 or known.max() >= len(self.attributes[j].values)
                               or np.any(known != np.floor(known))):
                raise SchemaError(f"categorical index out of range for {self.attributes[j].name!r}")

    def predict_proba(self, rows) -> np.ndarray:
        X = as_matrix(rows)
        self.check_schema(X)
        if self.only_class is not None:
            out = np.zeros((X.shape[0], self.n_classes))
            out[:, self.only_class] = 1.0
            return out
        return self._proba(X)

    def predict(self, rows) -> np.ndarray:
        return np.argmax(self.predict_proba(rows), axis=1)

    def _fit(self, X, y):
        raise NotImplementedError

    def _proba(self, X) -> np.ndarray:
        raise NotImplementedError


def fit(spec: LearnerSpec, train: Dataset) -> Model:
    if len(train) == 0:
        raise LearnerError(spec.label, "empty training set", train.name)
    cls = learner_class(spec.id)
    if _OBSERVERS:
        notify("fit", spec, train)
    try:
        model = cls(train.attributes, train.n_classes, spec.params, spec.seed)
        model.fit(train.X, train.y)
    except LearnerError:
        raise
    except Exception as exc:
        raise LearnerError(spec.label, f"fit failed: {exc}", train.name) from exc
    model.spec = spec
    model.train_origin = train.origin
    return model


def predict(model: Model, instance) -> int:
    return int(model.predict(instance)[0])


def class_distribution(model: Model, instance) -> np.ndarray:
    return model.predict_proba(instance)[0]


def accuracy(model: Model, test: Dataset) -> float:
    if len(test) == 0:
        raise ValueError("empty test set")
    if _OBSERVERS:
        notify("score", model, test)
    return float(np.mean(model.predict(test.X) == test.y))


def out_of_fold_predictions(specs, dataset: Dataset, plan) -> np.ndarray:
    """(learners, instances) out-of-fold predictions, every learner sharing ``plan``."""
    preds = np.empty((len(specs), len(dataset)), dtype=np.int64)
    for f in range(plan.fold_count):
        train = dataset.subset(plan.train_indices(f))
        test = plan.test_indices(f)
        for r, spec in enumerate(specs):
            preds[r, test] = fit(spec, train).predict(dataset.X[test])
    return preds


def vote_distribution(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Row-normalised vote counts for an (n, k) label matrix."""
    counts = np.zeros((labels.shape[0], n_classes))
    rows = np.repeat(np.arange(labels.shape[0]), labels.shape[1])
    np.add.at(counts, (rows, labels.ravel()), 1.0)
    return counts / labels.shape[1]
