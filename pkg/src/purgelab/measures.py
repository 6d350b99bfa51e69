"""Instance hardness, per-instance hardness measures and dataset complexity measures.

Distances are HEOM with ranges from the whole dataset (see
:mod:`purgelab.learners.distance`), except N3 which re-derives ranges with
the held-out instance removed, exactly as a fitted 1-NN would.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple, Sequence

import numpy as np

from .datakit import CVProtocol, Dataset, numeric_ranges
from .learners import LearnerSpec, fit, heom, out_of_fold_predictions

N2_FLOOR = 1e-12
HARDNESS_COLUMNS = ("IH", "kDN", "DS", "DCP", "TD", "CL", "CLD", "MV", "CB")
COMPLEXITY_COLUMNS = ("F2", "F3", "F4", "N1", "N2", "N3", "T1", "T2")


@dataclass(frozen=True, eq=False)
class HardnessProfile:
    kDN: np.ndarray
    DS: np.ndarray
    DCP: np.ndarray
    TD: np.ndarray
    CL: np.ndarray
    CLD: np.ndarray
    MV: np.ndarray
    CB: np.ndarray
    IH: np.ndarray | None = None

    def rows(self) -> list[dict]:
        cols = {f.name: getattr(self, f.name) for f in fields(self)}
        n = len(self.kDN)
        return [{c: (None if cols[c] is None else float(cols[c][i])) for c in HARDNESS_COLUMNS} for i in range(n)]


@dataclass(frozen=True)
class ComplexityProfile:
    F2: float
    F3: float
    F4: float
    N1: float
    N2: float
    N3: float
    T1: float
    T2: float

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in COMPLEXITY_COLUMNS}


class NoisyReport(NamedTuple):
    indices: np.ndarray
    percent: float


# ---------------------------------------------------------------- instance hardness

def instance_hardness(dataset: Dataset, specs: Sequence[LearnerSpec],
                      protocol: CVProtocol = CVProtocol(10, 1, 0)) -> np.ndarray:
    """Fraction of learners whose out-of-fold prediction misses the observed label, averaged over repeats."""
    if not specs:
        raise ValueError("need at least one learner spec")
    plans = protocol.plans(dataset)
    wrong = np.zeros(len(dataset))
    for plan in plans:
        wrong += (out_of_fold_predictions(specs, dataset, plan) != dataset.y).mean(axis=0)
    return wrong / len(plans)


def noisy_instances(hardness, cutoff: float = 0.9) -> NoisyReport:
    """Instances with hardness strictly above ``cutoff``, plus their share of the dataset in percent."""
    if not 0.0 <= cutoff <= 1.0:
        raise ValueError("cutoff must be in [0, 1]")
    ih = np.asarray(hardness, dtype=float)
    idx = np.flatnonzero(ih > cutoff)
    return NoisyReport(idx, 100.0 * idx.size / ih.size if ih.size else 0.0)


# ---------------------------------------------------------------- hardness measures

def _full_distances(dataset: Dataset) -> np.ndarray:
    cat = dataset.categorical_mask
    lo, hi = numeric_ranges(dataset.X, cat)
    return heom(dataset.X, dataset.X, cat, lo, hi)


def k_disagreeing_neighbors(dataset: Dataset, k: int = 5, distances: np.ndarray | None = None) -> np.ndarray:
    n = len(dataset)
    if k < 1 or k >= n:
        raise ValueError(f"kDN needs 1 <= k < n (k={k}, n={n})")
    D = _full_distances(dataset) if distances is None else distances
    out = np.empty(n)
    for i in range(n):
        others = np.delete(np.arange(n), i)
        near = others[np.argsort(D[i, others], kind="stable")[:k]]
        out[i] = np.mean(dataset.y[near] != dataset.y[i])
    return out


def _leaf_stats(tree, dataset: Dataset):
    leaves = tree.leaf_of(dataset.X)
    n_leaves = len(tree.leaves_)
    size = np.bincount(leaves, minlength=n_leaves)
    by_class = np.zeros((n_leaves, dataset.n_classes))
    np.add.at(by_class, (leaves, dataset.y), 1.0)
    return leaves, size, by_class


def hardness_measures(dataset: Dataset, k: int = 5, seed: int = 0) -> HardnessProfile:
    """kDN, DS, DCP, TD, CL, CLD, MV and CB for every instance.

    DS uses an unpruned tree and DCP/TD a reduced-error-pruned one, both fit
    on the whole dataset; leaf populations count the dataset's own instances
    routed through the tree. CL/CLD come from naive Bayes posteriors.
    """
    n = len(dataset)
    y = dataset.y
    kdn = k_disagreeing_neighbors(dataset, k)

    unpruned = fit(LearnerSpec("decision-tree", {"pruning": "none"}, seed), dataset)
    leaves, size, _ = _leaf_stats(unpruned, dataset)
    ds = size[leaves] / size.max()

    pruned = fit(LearnerSpec("decision-tree", {"pruning": "reduced-error"}, seed), dataset)
    leaves, size, by_class = _leaf_stats(pruned, dataset)
    dcp = by_class[leaves, y] / size[leaves]
    td = np.array([pruned.leaves_[leaf].depth for leaf in leaves], dtype=float)

    post = fit(LearnerSpec("naive-bayes", {}, seed), dataset).predict_proba(dataset.X)
    cl = post[np.arange(n), y]
    others = post.copy()
    others[np.arange(n), y] = -np.inf
    cld = cl - others.max(axis=1)

    counts = dataset.class_counts()
    mv = counts[y] / counts.max()
    cb = counts[y] / n - 1.0 / dataset.n_classes
    return HardnessProfile(kdn, ds, dcp, td, cl, cld, mv, cb)


def hardness_profile(dataset: Dataset, specs: Sequence[LearnerSpec], protocol: CVProtocol = CVProtocol(10, 1, 0),
                     k: int = 5, seed: int = 0) -> HardnessProfile:
    """:func:`hardness_measures` with the instance-hardness column filled in."""
    base = hardness_measures(dataset, k, seed)
    values = {f.name: getattr(base, f.name) for f in fields(base)}
    values["IH"] = instance_hardness(dataset, specs, protocol)
    return HardnessProfile(**values)


# ---------------------------------------------------------------- complexity measures

def _class_pairs(dataset: Dataset):
    present = [c for c in range(dataset.n_classes) if np.any(dataset.y == c)]
    if len(present) < 2:
        raise ValueError("complexity measures need at least two classes present")
    return [(a, b) for i, a in enumerate(present) for b in present[i + 1:]]


def _numeric_columns(dataset: Dataset):
    return np.flatnonzero(~dataset.categorical_mask)


def _bounds(values: np.ndarray):
    known = values[~np.isnan(values)]
    return (known.min(), known.max()) if known.size else None


def _overlap_volume(dataset: Dataset, a: int, b: int) -> float:
    product = 1.0
    for j in _numeric_columns(dataset):
        ba, bb = _bounds(dataset.X[dataset.y == a, j]), _bounds(dataset.X[dataset.y == b, j])
        if ba is None or bb is None:
            continue
        overlap = max(0.0, min(ba[1], bb[1]) - max(ba[0], bb[0]))
        width = max(ba[1], bb[1]) - min(ba[0], bb[0])
        product *= overlap / width if width > 0 else 1.0
    return product


def _outside_overlap(X: np.ndarray, y: np.ndarray, a: int, b: int, j: int) -> np.ndarray:
    """Mask of rows whose attribute ``j`` lies outside the two classes' shared interval."""
    col = X[:, j]
    ba, bb = _bounds(col[y == a]), _bounds(col[y == b])
    known = ~np.isnan(col)
    if ba is None or bb is None:
        return np.zeros(col.size, dtype=bool)
    lower, upper = max(ba[0], bb[0]), min(ba[1], bb[1])
    with np.errstate(invalid="ignore"):
        return known & ((col < lower) | (col > upper))


def _feature_efficiency(dataset: Dataset, a: int, b: int) -> float:
    rows = (dataset.y == a) | (dataset.y == b)
    X, y = dataset.X[rows], dataset.y[rows]
    best = 0.0
    for j in _numeric_columns(dataset):
        best = max(best, _outside_overlap(X, y, a, b, j).mean())
    return best


def _collective_efficiency(dataset: Dataset, a: int, b: int) -> float:
    rows = (dataset.y == a) | (dataset.y == b)
    X, y = dataset.X[rows], dataset.y[rows]
    total = y.size
    remaining = np.ones(total, dtype=bool)
    unused = list(_numeric_columns(dataset))
    while unused and remaining.any():
        Xr, yr = X[remaining], y[remaining]
        if not (np.any(yr == a) and np.any(yr == b)):
            remaining[:] = False
            break
        masks = [_outside_overlap(Xr, yr, a, b, j) for j in unused]
        scores = [m.sum() for m in masks]
        pick = int(np.argmax(scores))
        if scores[pick] == 0:
            break
        idx = np.flatnonzero(remaining)
        remaining[idx[masks[pick]]] = False
        unused.pop(pick)
    return 1.0 - remaining.sum() / total


def minimum_spanning_tree(D: np.ndarray) -> list[tuple[int, int]]:
    """Prim's algorithm from vertex 0; ties go to the lower vertex, then the earlier parent."""
    n = D.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    key = np.full(n, np.inf)
    parent = np.full(n, -1)
    key[0] = 0.0
    edges = []
    for _ in range(n):
        v = int(np.argmin(np.where(in_tree, np.inf, key)))
        in_tree[v] = True
        if parent[v] >= 0:
            edges.append((int(parent[v]), v))
        better = ~in_tree & (D[v] < key)
        key[better] = D[v][better]
        parent[better] = v
    return edges


def boundary_fraction(D: np.ndarray, y: np.ndarray) -> float:
    """N1: share of vertices touching a cross-class MST edge."""
    on_boundary = np.zeros(y.size, dtype=bool)
    for u, v in minimum_spanning_tree(D):
        if y[u] != y[v]:
            on_boundary[u] = on_boundary[v] = True
    return float(on_boundary.mean())


def intra_inter_ratio(D: np.ndarray, y: np.ndarray) -> float:
    n = y.size
    intra, inter = [], []
    for i in range(n):
        same = (y == y[i])
        same[i] = False
        other = y != y[i]
        if same.any():
            intra.append(D[i, same].min())
        if other.any():
            inter.append(D[i, other].min())
    if not intra:
        return 0.0
    return float(np.mean(intra) / max(np.mean(inter), N2_FLOOR))


def leave_one_out_1nn_error(dataset: Dataset) -> float:
    """N3, with numeric ranges re-derived without the held-out instance."""
    X, y = dataset.X, dataset.y
    cat = dataset.categorical_mask
    n = y.size
    wrong = 0
    for i in range(n):
        rest = np.delete(np.arange(n), i)
        lo, hi = numeric_ranges(X[rest], cat)
        d = heom(X[i:i + 1], X[rest], cat, lo, hi)[0]
        wrong += y[rest][int(np.argmin(d))] != y[i]
    return wrong / n


def sphere_radii(D: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Radius of each instance's sphere, grown until it touches a sphere of another class.

    Two mutual nearest enemies split their distance evenly; otherwise an
    instance stops where its nearest enemy's sphere begins. A cycle of
    non-mutual enemies is broken by treating the re-entered sphere as radius 0.
    """
    n = y.size
    enemy_d = np.where(y[None, :] != y[:, None], D, np.inf)
    ne = np.argmin(enemy_d, axis=1)
    dist = enemy_d[np.arange(n), ne]
    r = np.full(n, -1.0)
    for start in range(n):
        stack, i = [], start
        while r[i] < 0:
            if ne[ne[i]] == i:
                r[i] = dist[i] / 2.0
                break
            r[i] = 0.0
            stack.append(i)
            i = ne[i]
        while stack:
            j = stack.pop()
            r[j] = abs(dist[j] - r[ne[j]])
    return r


def covering_sphere_fraction(D: np.ndarray, y: np.ndarray) -> float:
    """T1: share of same-class spheres left after larger spheres absorb those they contain.

    Spheres are visited largest first (ties by index); a surviving sphere
    absorbs every later same-class sphere lying entirely inside it.
    """
    n = y.size
    r = sphere_radii(D, y)
    order = np.lexsort((np.arange(n), -r))
    alive = np.ones(n, dtype=bool)
    for pos, a in enumerate(order):
        if not alive[a]:
            continue
        later = order[pos + 1:]
        inside = (y[later] == y[a]) & (D[a, later] + r[later] <= r[a] + 1e-12)
        alive[later[inside]] = False
    return float(alive.sum() / n)


def complexity_measures(dataset: Dataset) -> ComplexityProfile:
    """F2/F3/F4 averaged one-vs-one over class pairs (numeric attributes only, missing cells skipped);
    N1/N2/N3/T1 over HEOM distances; T2 = instances per attribute."""
    pairs = _class_pairs(dataset)
    if not dataset.attributes:
        raise ValueError("dataset has no attributes")
    f2 = float(np.mean([_overlap_volume(dataset, a, b) for a, b in pairs]))
    f3 = float(np.mean([_feature_efficiency(dataset, a, b) for a, b in pairs]))
    f4 = float(np.mean([_collective_efficiency(dataset, a, b) for a, b in pairs]))
    D = _full_distances(dataset)
    y = dataset.y
    return ComplexityProfile(
        F2=f2, F3=f3, F4=f4,
        N1=boundary_fraction(D, y),
        N2=intra_inter_ratio(D, y),
        N3=float(leave_one_out_1nn_error(dataset)),
        T1=covering_sphere_fraction(D, y),
        T2=len(dataset) / len(dataset.attributes),
    )
