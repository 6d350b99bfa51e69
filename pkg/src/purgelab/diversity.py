"""Classifier output difference and average-linkage clustering of learners."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datakit import CVProtocol, Dataset
from .learners import LearnerSpec, out_of_fold_predictions


@dataclass(frozen=True, eq=False)
class CodMatrix:
    learner_ids: tuple[str, ...]
    distances: np.ndarray

    def __post_init__(self):
        d = np.array(self.distances, dtype=float)
        n = len(self.learner_ids)
        if d.shape != (n, n):
            raise ValueError("distance grid does not match learner count")
        if not np.all(np.isfinite(d)):
            raise ValueError("non-finite distances")
        if np.any(np.diag(d) != 0) or np.max(np.abs(d - d.T), initial=0.0) > 1e-12:
            raise ValueError("COD grid must be symmetric with a zero diagonal")
        d.setflags(write=False)
        object.__setattr__(self, "learner_ids", tuple(self.learner_ids))
        object.__setattr__(self, "distances", d)


@dataclass(frozen=True)
class Merge:
    a: int  # cluster ids: leaves are 0..n-1, the k-th merge creates n+k
    b: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    leaf_ids: tuple[str, ...]
    merges: tuple[Merge, ...]

    def members(self) -> dict[int, list[int]]:
        n = len(self.leaf_ids)
        groups = {i: [i] for i in range(n)}
        for k, m in enumerate(self.merges):
            groups[n + k] = sorted(groups[m.a] + groups[m.b])
        return groups


def cod_pair(preds_a, preds_b) -> float:
    a, b = np.asarray(preds_a), np.asarray(preds_b)
    if a.shape != b.shape:
        raise ValueError("prediction sequences differ in length")
    if a.size == 0:
        raise ValueError("empty prediction sequences")
    return float(np.mean(a != b))


def _unique_labels(specs: Sequence[LearnerSpec]) -> tuple[str, ...]:
    seen: dict[str, int] = {}
    out = []
    for s in specs:
        seen[s.label] = seen.get(s.label, 0) + 1
        out.append(s.label if seen[s.label] == 1 else f"{s.label}#{seen[s.label]}")
    return tuple(out)


def cod_matrix(specs: Sequence[LearnerSpec], datasets: Sequence[Dataset],
               protocol: CVProtocol = CVProtocol(10, 1, 0)) -> CodMatrix:
    """Mean over datasets (and repeats) of pairwise COD on out-of-fold predictions."""
    if len(specs) < 2:
        raise ValueError("need at least two learners")
    if not datasets:
        raise ValueError("need at least one dataset")
    L = len(specs)
    total = np.zeros((L, L))
    for ds in datasets:
        per_ds = np.zeros((L, L))
        plans = protocol.plans(ds)
        for plan in plans:
            preds = out_of_fold_predictions(specs, ds, plan)
            for i in range(L):
                for j in range(i + 1, L):
                    per_ds[i, j] += cod_pair(preds[i], preds[j])
        total += per_ds / len(plans)
    total /= len(datasets)
    total = total + total.T
    return CodMatrix(_unique_labels(specs), total)


def agglomerate(matrix: CodMatrix, linkage: str = "average") -> Dendrogram:
    """Average-linkage (UPGMA) agglomerative clustering.

    The closest pair of clusters merges first; equal distances go to the
    pair whose smallest leaf indices are lexicographically lowest.
    """
    if linkage != "average":
        raise ValueError("only average linkage is supported")
    D = np.array(matrix.distances, dtype=float)
    n = D.shape[0]
    if n < 2:
        raise ValueError("need at least two leaves")
    if not np.all(np.isfinite(D)):
        raise ValueError("non-finite distances")
    active = {i: (i, 1) for i in range(n)}  # cluster id -> (smallest leaf, size)
    dist = {(i, j): D[i, j] for i in range(n) for j in range(i + 1, n)}
    merges = []
    for k in range(n - 1):
        def key(pair):
            ka, kb = sorted((active[pair[0]][0], active[pair[1]][0]))
            return (dist[pair], ka, kb)
        a, b = min(dist, key=key)
        if active[a][0] > active[b][0]:
            a, b = b, a
        height = dist[(min(a, b), max(a, b))]
        (la, na), (lb, nb) = active.pop(a), active.pop(b)
        new = n + k
        for c in active:
            dac = dist.pop((min(a, c), max(a, c)))
            dbc = dist.pop((min(b, c), max(b, c)))
            dist[(c, new)] = (na * dac + nb * dbc) / (na + nb)
        dist.pop((min(a, b), max(a, b)))
        active[new] = (min(la, lb), na + nb)
        merges.append(Merge(a, b, float(height), na + nb))
    return Dendrogram(matrix.learner_ids, tuple(merges))


def cut(dendrogram: Dendrogram, height: float) -> list[list[int]]:
    """Leaf-index clusters joined by merges strictly below ``height``."""
    if height < 0:
        raise ValueError("cut height must be non-negative")
    n = len(dendrogram.leaf_ids)
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, m in enumerate(dendrogram.merges):
        if m.height < height:
            parent[find(m.a)] = n + k
            parent[find(m.b)] = n + k
    groups: dict[int, list[int]] = {}
    for leaf in range(n):
        groups.setdefault(find(leaf), []).append(leaf)
    return sorted(groups.values(), key=lambda g: g[0])


def representatives(partition: Sequence[Sequence[int]], matrix: CodMatrix) -> list[str]:
    """Medoid of each cluster (smallest summed COD to its members; ties to the lower index)."""
    if not partition:
        raise ValueError("empty partition")
    D = matrix.distances
    out = []
    for group in partition:
        group = sorted(group)
        sums = [D[i, group].sum() for i in group]
        out.append(matrix.learner_ids[group[int(np.argmin(sums))]])
    return out


def dendrogram_text(dendrogram: Dendrogram) -> str:
    """Indented tree, one node per line; internal nodes show their merge height."""
    n = len(dendrogram.leaf_ids)
    lines = []

    def walk(node, depth):
        pad = "  " * depth
        if node < n:
            lines.append(f"{pad}{dendrogram.leaf_ids[node]}")
            return
        m = dendrogram.merges[node - n]
        lines.append(f"{pad}+ {m.height:.6f}")
        walk(m.a, depth + 1)
        walk(m.b, depth + 1)

    walk(n + len(dendrogram.merges) - 1 if dendrogram.merges else 0, 0)
    return "\n".join(lines) + "\n"


def merges_csv(dendrogram: Dendrogram) -> str:
    """Merge list as CSV; internal clusters are named ``#<cluster id>``."""
    n = len(dendrogram.leaf_ids)
    name = lambda c: dendrogram.leaf_ids[c] if c < n else f"#{c}"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cluster", "a", "b", "height", "size"])
    for k, m in enumerate(dendrogram.merges):
        w.writerow([f"#{n + k}", name(m.a), name(m.b), repr(m.height), m.size])
    return buf.getvalue()
