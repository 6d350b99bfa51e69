"""Datasets: schema, loading (CSV/ARFF), folds, noise injection, synthetic blobs.

A :class:`Dataset` keeps its cells in a float matrix ``X`` (categorical cells
hold the value index, missing cells are NaN) and its observed labels in an
integer vector ``y``. Missing cells are kept as-is; each learner or measure
documents how it treats them.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .rng import generator

MISSING_MARKERS = ("?", "")


class DataError(ValueError):
    """Base class for problems with input data."""


class UnreadableFileError(DataError):
    pass


class RaggedRowError(DataError):
    pass


class MissingLabelError(DataError):
    pass


class UnknownColumnError(DataError):
    pass


class ArffFormatError(DataError):
    pass


class UnsupportedArffFeature(ArffFormatError):
    pass


@dataclass(frozen=True)
class AttributeMeta:
    name: str
    values: tuple[str, ...] | None = None  # None means numeric

    def __post_init__(self):
        if self.values is not None:
            if not self.values:
                raise DataError(f"categorical attribute {self.name!r} has no values")
            if len(set(self.values)) != len(self.values):
                raise DataError(f"categorical attribute {self.name!r} has duplicate values")

    @property
    def kind(self) -> str:
        return "numeric" if self.values is None else "categorical"

    @property
    def is_categorical(self) -> bool:
        return self.values is not None


@dataclass(frozen=True)
class Instance:
    values: tuple  # float | int | None per attribute
    label: int


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    attributes: tuple[AttributeMeta, ...]
    class_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    # row ids in the dataset this one was cut from (identity for a root dataset)
    origin: np.ndarray = field(default=None)

    def __post_init__(self):
        attrs = tuple(self.attributes)
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1 and not attrs:
            X = X.reshape(-1, 0)
        y = np.asarray(self.y, dtype=np.int64)
        if len(self.class_names) < 2:
            raise DataError("a dataset needs at least 2 classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError("duplicate class names")
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise DataError("attribute names must be unique")
        if X.ndim != 2 or X.shape[1] != len(attrs):
            raise DataError(f"cell matrix shape {X.shape} does not match {len(attrs)} attributes")
        if y.shape != (X.shape[0],):
            raise DataError("label vector length does not match instance count")
        if X.shape[0] < 1:
            raise DataError("a dataset needs at least 1 instance")
        if y.min() < 0 or y.max() >= len(self.class_names):
            raise DataError("label index out of range")
        for j, a in enumerate(attrs):
            col = X[:, j]
            known = col[~np.isnan(col)]
            if a.is_categorical and known.size:
                if np.any(known != np.floor(known)) or known.min() < 0 or known.max() >= len(a.values):
                    raise DataError(f"categorical index out of range in {a.name!r}")
            if np.any(np.isinf(known)):
                raise DataError(f"infinite value in {a.name!r}")
        origin = np.arange(X.shape[0]) if self.origin is None else np.asarray(self.origin, dtype=np.int64)
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "origin", _readonly(origin))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.array([a.is_categorical for a in self.attributes], dtype=bool)

    def instance(self, i: int) -> Instance:
        cells = []
        for a, v in zip(self.attributes, self.X[i]):
            if math.isnan(v):
                cells.append(None)
            elif a.is_categorical:
                cells.append(int(v))
            else:
                cells.append(float(v))
        return Instance(tuple(cells), int(self.y[i]))

    @property
    def instances(self) -> list[Instance]:
        return [self.instance(i) for i in range(len(self))]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    def subset(self, indices, name: str | None = None) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(name or self.name, self.attributes, self.class_names,
                       self.X[idx], self.y[idx], self.origin[idx])

    def with_labels(self, y) -> "Dataset":
        return Dataset(self.name, self.attributes, self.class_names, self.X, y, self.origin)

    def type_hints(self) -> dict:
        """Hints that make :func:`load_csv` reproduce this schema exactly."""
        hints = {a.name: (list(a.values) if a.is_categorical else "numeric") for a in self.attributes}
        hints[LABEL_HEADER] = list(self.class_names)
        return hints

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.name == other.name and self.attributes == other.attributes
                and self.class_names == other.class_names
                and np.array_equal(self.X, other.X, equal_nan=True)
                and np.array_equal(self.y, other.y))

    __hash__ = None


LABEL_HEADER = "class"


class FoldPlan(NamedTuple):
    fold_count: int
    seed: int
    assignment: np.ndarray

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


# ---------------------------------------------------------------- CSV

def _is_missing(cell: str) -> bool:
    return cell.strip() in MISSING_MARKERS


def _parse_float(cell: str) -> float | None:
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(path, label_column: str | int = -1, type_hints: Mapping | None = None,
             name: str | None = None) -> Dataset:
    """Load a headed CSV file.

    ``label_column`` is a header name or a (possibly negative) column index.
    ``type_hints`` maps column names to ``"numeric"``, ``"categorical"`` or an
    explicit list of categorical values (which fixes their order). Without a
    hint a column is numeric iff every non-missing cell parses as a real
    number; categorical values are ordered by first appearance. The label
    column may carry a hint under its own name to fix the class order.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and any(c.strip() for c in r)] if rows else []
    if not rows:
        raise UnreadableFileError(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise RaggedRowError(f"{path}: row {lineno} has {len(r)} cells, header has {len(header)}")
    if isinstance(label_column, str):
        if label_column not in header:
            raise UnknownColumnError(f"{path}: no column named {label_column!r}")
        li = header.index(label_column)
    else:
        if not -len(header) <= label_column < len(header):
            raise UnknownColumnError(f"{path}: column index {label_column} out of range")
        li = label_column % len(header)
    hints = dict(type_hints or {})
    unknown = set(hints) - set(header) - {LABEL_HEADER}
    if unknown:
        raise UnknownColumnError(f"{path}: type hints for unknown columns {sorted(unknown)}")

    labels = []
    for lineno, r in enumerate(body, start=2):
        if _is_missing(r[li]):
            raise MissingLabelError(f"{path}: missing label on row {lineno}")
        labels.append(r[li].strip())
    label_hint = hints.get(header[li])
    if label_hint is None and LABEL_HEADER not in header:
        label_hint = hints.get(LABEL_HEADER)
    if isinstance(label_hint, (list, tuple)):
        class_names = tuple(label_hint)
        bad = set(labels) - set(class_names)
        if bad:
            raise DataError(f"{path}: labels {sorted(bad)} not in hinted class list")
    else:
        class_names = tuple(dict.fromkeys(labels))

    attributes, columns = [], []
    for j, colname in enumerate(header):
        if j == li:
            continue
        cells = [r[j].strip() for r in body]
        hint = hints.get(colname)
        if hint is None:
            numeric = all(_parse_float(c) is not None for c in cells if not _is_missing(c))
            hint = "numeric" if numeric else "categorical"
        if hint == "numeric":
            col = []
            for lineno, c in enumerate(cells, start=2):
                if _is_missing(c):
                    col.append(np.nan)
                    continue
                v = _parse_float(c)
                if v is None:
                    raise DataError(f"{path}: non-numeric cell {c!r} in numeric column {colname!r} (row {lineno})")
                col.append(v)
            attributes.append(AttributeMeta(colname))
        else:
            if hint == "categorical":
                values = tuple(dict.fromkeys(c for c in cells if not _is_missing(c)))
                if not values:
                    raise DataError(f"{path}: categorical column {colname!r} has no values")
            elif isinstance(hint, (list, tuple)):
                values = tuple(hint)
            else:
                raise DataError(f"bad type hint {hint!r} for column {colname!r}")
            lookup = {v: k for k, v in enumerate(values)}
            col = []
            for c in cells:
                if _is_missing(c):
                    col.append(np.nan)
                elif c in lookup:
                    col.append(lookup[c])
                else:
                    raise DataError(f"{path}: value {c!r} not in hinted values of {colname!r}")
            attributes.append(AttributeMeta(colname, values))
        columns.append(col)
    lookup = {c: k for k, c in enumerate(class_names)}
    X = np.array(columns, dtype=float).T if columns else np.empty((len(body), 0))
    y = np.array([lookup[v] for v in labels], dtype=np.int64)
    if len(body) == 0:
        raise DataError(f"{path}: no data rows")
    return Dataset(name or path.stem, tuple(attributes), class_names, X, y)


def _format_number(v: float) -> str:
    return repr(float(v))


def write_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` as CSV with the label in a final ``class`` column.

    Numbers are written with ``repr`` so they re-parse bit-exactly; missing
    cells become ``?``. Use :meth:`Dataset.type_hints` when re-loading.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([a.name for a in dataset.attributes] + [LABEL_HEADER])
        for row, label in zip(dataset.X, dataset.y):
            cells = []
            for a, v in zip(dataset.attributes, row):
                if math.isnan(v):
                    cells.append("?")
                elif a.is_categorical:
                    cells.append(a.values[int(v)])
                else:
                    cells.append(_format_number(v))
            w.writerow(cells + [dataset.class_names[label]])


# ---------------------------------------------------------------- ARFF

def _split_arff(line: str) -> list[str]:
    """Split a comma-separated ARFF line, honouring single and double quotes."""
    out, buf, quote, i = [], [], None, 0
    quoted_field = False
    while i < len(line):
        ch = line[i]
        if quote:
            if ch == "\\" and i + 1 < len(line):
                buf.append(line[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
            else:
                buf.append(ch)
        elif ch in "'\"":
            quote = ch
            quoted_field = True
            if not "".join(buf).strip():
                buf = []
        elif ch == ",":
            out.append("".join(buf) if quoted_field else "".join(buf).strip())
            buf, quoted_field = [], False
        else:
            buf.append(ch)
        i += 1
    if quote:
        raise ArffFormatError(f"unterminated quote in {line!r}")
    out.append("".join(buf) if quoted_field else "".join(buf).strip())
    return out


def _unquote(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "'\"":
        return token[1:-1]
    return token


def _split_decl(rest: str) -> tuple[str, str]:
    """Split '@attribute <name> <type>' remainder into (name, type)."""
    rest = rest.strip()
    if rest[:1] in "'\"":
        end = rest.find(rest[0], 1)
        if end < 0:
            raise ArffFormatError(f"unterminated attribute name in {rest!r}")
        return rest[1:end], rest[end + 1:].strip()
    parts = rest.split(None, 1)
    if len(parts) != 2:
        raise ArffFormatError(f"attribute declaration without a type: {rest!r}")
    return parts[0], parts[1].strip()


def load_arff(path, name: str | None = None) -> Dataset:
    """Load the dense ARFF subset: numeric/real/integer and nominal attributes.

    The class is the attribute named ``class`` (case-insensitive) if there is
    one, otherwise the last attribute; it must be nominal.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc

    relation, decls, rows = None, [], []
    section = "header"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if section == "data":
            if low.startswith("@"):
                raise ArffFormatError(f"{path}:{lineno}: declaration after @data")
            if line.startswith("{"):
                raise UnsupportedArffFeature(f"{path}:{lineno}: unsupported ARFF feature: sparse data")
            rows.append((lineno, _split_arff(line)))
        elif low.startswith("@relation"):
            if relation is not None or decls:
                raise ArffFormatError(f"{path}:{lineno}: @relation must come first and only once")
            relation = _unquote(line[len("@relation"):])
        elif low.startswith("@attribute"):
            if relation is None:
                raise ArffFormatError(f"{path}:{lineno}: @attribute before @relation")
            aname, atype = _split_decl(line[len("@attribute"):])
            tlow = atype.lower()
            if atype.startswith("{"):
                if not atype.endswith("}"):
                    raise ArffFormatError(f"{path}:{lineno}: unterminated nominal list")
                values = tuple(v for v in _split_arff(atype[1:-1]))
                decls.append(AttributeMeta(aname, values))
            elif tlow in ("numeric", "real", "integer"):
                decls.append(AttributeMeta(aname))
            elif tlow.split()[0] in ("string", "date", "relational"):
                raise UnsupportedArffFeature(f"{path}:{lineno}: unsupported ARFF feature: {tlow.split()[0]} attribute")
            else:
                raise ArffFormatError(f"{path}:{lineno}: unknown attribute type {atype!r}")
        elif low.startswith("@end"):
            raise UnsupportedArffFeature(f"{path}:{lineno}: unsupported ARFF feature: relational attribute")
        elif low.startswith("@data"):
            if relation is None or not decls:
                raise ArffFormatError(f"{path}:{lineno}: @data before @relation/@attribute")
            section = "data"
        else:
            raise ArffFormatError(f"{path}:{lineno}: unexpected line {line!r}")
    if section != "data":
        raise ArffFormatError(f"{path}: no @data section")
    if not rows:
        raise DataError(f"{path}: no data rows")

    ci = next((j for j, a in enumerate(decls) if a.name.lower() == "class"), len(decls) - 1)
    cls = decls[ci]
    if not cls.is_categorical:
        raise ArffFormatError(f"{path}: class attribute {cls.name!r} must be nominal")
    X = np.full((len(rows), len(decls) - 1), np.nan)
    y = np.empty(len(rows), dtype=np.int64)
    lookups = [None if not a.is_categorical else {v: k for k, v in enumerate(a.values)} for a in decls]
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != len(decls):
            raise RaggedRowError(f"{path}:{lineno}: {len(cells)} values for {len(decls)} attributes")
        col = 0
        for j, (a, c) in enumerate(zip(decls, cells)):
            missing = c == "?"
            if j == ci:
                if missing:
                    raise MissingLabelError(f"{path}:{lineno}: missing label")
                if c not in lookups[j]:
                    raise ArffFormatError(f"{path}:{lineno}: undeclared nominal value {c!r} for {a.name!r}")
                y[r] = lookups[j][c]
                continue
            if not missing:
                if a.is_categorical:
                    if c not in lookups[j]:
                        raise ArffFormatError(f"{path}:{lineno}: undeclared nominal value {c!r} for {a.name!r}")
                    X[r, col] = lookups[j][c]
                else:
                    v = _parse_float(c)
                    if v is None:
                        raise ArffFormatError(f"{path}:{lineno}: bad numeric value {c!r} for {a.name!r}")
                    X[r, col] = v
            col += 1
    attrs = tuple(a for j, a in enumerate(decls) if j != ci)
    return Dataset(name or relation or path.stem, attrs, cls.values, X, y)


def load_dataset(path, label_column: str | int = -1) -> Dataset:
    """Dispatch on file extension (``.arff`` or CSV otherwise)."""
    if str(path).lower().endswith(".arff"):
        return load_arff(path)
    return load_csv(path, label_column)


# ---------------------------------------------------------------- resampling

def stratified_folds(dataset: Dataset, fold_count: int, seed: int) -> FoldPlan:
    """Seeded stratified fold assignment.

    Instances are shuffled, grouped by class (stable), and dealt to folds
    round-robin with one counter running across all classes, so per-class
    and overall fold sizes each differ by at most one.
    """
    n = len(dataset)
    if fold_count < 2:
        raise ValueError("fold_count must be at least 2")
    if fold_count > n:
        raise ValueError(f"fold_count {fold_count} exceeds instance count {n}")
    order = generator(seed).permutation(n)
    order = order[np.argsort(dataset.y[order], kind="stable")]
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % fold_count
    assignment.setflags(write=False)
    return FoldPlan(fold_count, seed, assignment)


def stratified_holdout(dataset: Dataset, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into (train, holdout) with ``round(fraction * n_c)`` of each class held out.

    Classes with at least two members always keep one instance on each side.
    """
    rng = generator(seed)
    train, hold = [], []
    for c in range(dataset.n_classes):
        idx = np.flatnonzero(dataset.y == c)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        k = int(math.floor(fraction * idx.size + 0.5))
        if idx.size >= 2:
            k = min(max(k, 1), idx.size - 1)
        hold.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(hold))


class AttributeRange(NamedTuple):
    low: float
    high: float

    @property
    def defined(self) -> bool:
        return not (math.isnan(self.low) or math.isnan(self.high))


def numeric_ranges(X: np.ndarray, categorical: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise (min, max) over non-missing cells; NaN where undefined or categorical."""
    lo = np.full(X.shape[1], np.nan)
    hi = np.full(X.shape[1], np.nan)
    for j in np.flatnonzero(~categorical):
        col = X[:, j]
        col = col[~np.isnan(col)]
        if col.size:
            lo[j], hi[j] = col.min(), col.max()
    return lo, hi


def min_max_ranges(dataset: Dataset) -> dict[str, AttributeRange]:
    lo, hi = numeric_ranges(dataset.X, dataset.categorical_mask)
    return {a.name: AttributeRange(float(lo[j]), float(hi[j]))
            for j, a in enumerate(dataset.attributes) if not a.is_categorical}


# ---------------------------------------------------------------- noise and synthesis

def inject_label_noise(dataset: Dataset, rate: float, seed: int) -> tuple[Dataset, np.ndarray]:
    """Relabel exactly ``round(rate * n)`` uniformly chosen instances.

    Each chosen instance gets a label drawn uniformly from the other classes.
    Rounding is half-up. Returns the noisy dataset and the sorted corrupted
    indices.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"noise rate {rate} outside [0, 1]")
    n = len(dataset)
    count = int(math.floor(rate * n + 0.5))
    rng = generator(seed)
    chosen = np.sort(rng.choice(n, size=count, replace=False)) if count else np.empty(0, dtype=np.int64)
    y = dataset.y.copy()
    shift = rng.integers(1, dataset.n_classes, size=count)
    y[chosen] = (y[chosen] + shift) % dataset.n_classes
    return dataset.with_labels(y), chosen


def blob_centers(class_count: int, dimension: int) -> np.ndarray:
    """Class means: class c sits on axis ``c % dimension`` at an odd multiple of 1/sqrt(2).

    Nearest means are exactly 1 apart when ``dimension >= 2``.
    """
    centers = np.zeros((class_count, dimension))
    for c in range(class_count):
        k = c // dimension
        magnitude = 2 * (k // 2) + 1
        centers[c, c % dimension] = (1 if k % 2 == 0 else -1) * magnitude / math.sqrt(2)
    return centers


def make_blobs(class_count: int, per_class: int, dimension: int, spread: float, seed: int,
               name: str | None = None) -> Dataset:
    """Isotropic Gaussian clusters with standard deviation ``spread`` around :func:`blob_centers`."""
    if class_count < 2 or per_class < 1 or dimension < 1:
        raise ValueError("need class_count >= 2, per_class >= 1, dimension >= 1")
    if not spread > 0:
        raise ValueError("spread must be positive")
    rng = generator(seed)
    centers = blob_centers(class_count, dimension)
    X = np.repeat(centers, per_class, axis=0) + rng.normal(0.0, spread, size=(class_count * per_class, dimension))
    y = np.repeat(np.arange(class_count), per_class)
    attrs = tuple(AttributeMeta(f"x{j}") for j in range(dimension))
    classes = tuple(f"c{c}" for c in range(class_count))
    return Dataset(name or f"blobs-{class_count}x{per_class}x{dimension}-s{seed}", attrs, classes, X, y)


@dataclass(frozen=True)
class CVProtocol:
    """Repeated stratified k-fold cross-validation.

    The fold seed of repeat ``r`` on a dataset is
    ``derive_seed(seed, dataset.name, r)``, the same derivation the
    experiment engine uses.
    """

    folds: int = 10
    repeats: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2 or self.repeats < 1:
            raise ValueError("CVProtocol needs folds >= 2 and repeats >= 1")

    def plans(self, dataset: Dataset) -> list[FoldPlan]:
        from .rng import derive_seed

        return [stratified_folds(dataset, self.folds, derive_seed(self.seed, dataset.name, r))
                for r in range(self.repeats)]
