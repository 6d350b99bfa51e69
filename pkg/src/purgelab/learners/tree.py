from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..rng import generator
from .base import Model, register_learner


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Entropy in bits of class-count vectors along the last axis."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / total[..., None]
        terms = np.where(counts > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return np.where(total > 0, -terms.sum(axis=-1), 0.0)


@dataclass
class Node:
    counts: np.ndarray  # training instances reaching the node, per class
    dist: np.ndarray  # class distribution used for prediction
    depth: int
    attribute: int | None = None
    threshold: float | None = None  # numeric split: left is value <= threshold
    children: list = field(default_factory=list)
    default_branch: int = 0  # where missing values go
    leaf_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.attribute is None

    @property
    def coverage(self) -> int:
        return int(self.counts.sum())


@register_learner
class DecisionTree(Model):
    """Gain-ratio decision tree.

    Numeric attributes get binary ``<= threshold`` splits (threshold chosen by
    information gain, midpoint between adjacent distinct values); categorical
    attributes split multiway. As in C4.5, the split is the best gain ratio
    among candidates whose gain is at least the average gain. A split must
    leave ``min_leaf`` instances in at least two branches. Instances with a
    missing split value follow the branch that received the most training
    instances.

    ``pruning="reduced-error"`` grows on a seeded 80% and prunes bottom-up on
    the remaining ``prune_fraction``; ``pruning="none"`` grows on everything.
    """

    learner_id = "decision-tree"
    defaults = {"pruning": "reduced-error", "min_leaf": 2, "prune_fraction": 0.2, "max_depth": 0}

    def _fit(self, X, y):
        p = self.params
        if p["pruning"] not in ("reduced-error", "none"):
            raise ValueError(f"pruning must be 'reduced-error' or 'none', got {p['pruning']!r}")
        if not 0 < float(p["prune_fraction"]) < 1:
            raise ValueError("prune_fraction must be in (0, 1)")
        self.min_leaf = max(1, int(p["min_leaf"]))
        self.max_depth = int(p["max_depth"]) or None
        n = len(y)
        grow = np.arange(n)
        prune = np.empty(0, dtype=np.int64)
        if p["pruning"] == "reduced-error":
            k = int(math.floor(float(p["prune_fraction"]) * n + 0.5))
            if 0 < k < n:
                order = generator(self.seed).permutation(n)
                prune, grow = np.sort(order[:k]), np.sort(order[k:])
        self.root_ = self._grow(X, y, grow, depth=0)
        if prune.size:
            self._prune(self.root_, X, y, prune)
        self.leaves_ = []
        self._number(self.root_)

    # -- growing

    def _counts(self, y, idx):
        return np.bincount(y[idx], minlength=self.n_classes).astype(float)

    def _grow(self, X, y, idx, depth, parent_dist=None):
        counts = self._counts(y, idx)
        dist = counts / counts.sum() if counts.sum() > 0 else parent_dist
        node = Node(counts, dist, depth)
        if (counts.sum() < 2 * self.min_leaf or np.count_nonzero(counts) <= 1
                or (self.max_depth is not None and depth >= self.max_depth)):
            return node
        split = self._best_split(X, y, idx)
        if split is None:
            return node
        attribute, threshold, branches = split
        node.attribute, node.threshold = attribute, threshold
        sizes = [b.size for b in branches]
        node.default_branch = int(np.argmax(sizes))
        missing = idx[np.isnan(X[idx, attribute])]
        if missing.size:
            branches[node.default_branch] = np.sort(np.concatenate([branches[node.default_branch], missing]))
        node.children = [self._grow(X, y, b, depth + 1, dist) for b in branches]
        return node

    def _best_split(self, X, y, idx):
        n = idx.size
        candidates = []
        for j in range(X.shape[1]):
            col = X[idx, j]
            known = ~np.isnan(col)
            kidx, kval = idx[known], col[known]
            m = kidx.size
            if m < 2 * self.min_leaf:
                continue
            base = _entropy(self._counts(y, kidx))
            frac = m / n
            if self.categorical[j]:
                values = kval.astype(int)
                V = len(self.attributes[j].values)
                table = np.zeros((V, self.n_classes))
                np.add.at(table, (values, y[kidx]), 1.0)
                sizes = table.sum(axis=1)
                if np.count_nonzero(sizes >= self.min_leaf) < 2:
                    continue
                gain = frac * (base - np.sum(sizes / m * _entropy(table)))
                split_info = float(_entropy(sizes))
                branches = [kidx[values == v] for v in range(V)]
                candidates.append((gain, split_info, j, None, branches))
            else:
                order = np.argsort(kval, kind="stable")
                sv, sy = kval[order], y[kidx][order]
                onehot = np.zeros((m, self.n_classes))
                onehot[np.arange(m), sy] = 1.0
                left = np.cumsum(onehot, axis=0)[:-1]
                right = left[-1] + onehot[-1] - left
                nl = np.arange(1, m)
                ok = (sv[:-1] < sv[1:]) & (nl >= self.min_leaf) & (m - nl >= self.min_leaf)
                if not ok.any():
                    continue
                cond = (nl * _entropy(left) + (m - nl) * _entropy(right)) / m
                gains = np.where(ok, base - cond, -np.inf)
                pos = int(np.argmax(gains))
                gain = frac * gains[pos]
                split_info = float(_entropy(np.array([pos + 1, m - pos - 1])))
                threshold = (sv[pos] + sv[pos + 1]) / 2.0
                branches = [np.sort(kidx[order[:pos + 1]]), np.sort(kidx[order[pos + 1:]])]
                candidates.append((gain, split_info, j, threshold, branches))
        candidates = [c for c in candidates if c[0] > 1e-12 and c[1] > 0]
        if not candidates:
            return None
        average = np.mean([c[0] for c in candidates])
        best = None
        for gain, split_info, j, threshold, branches in candidates:
            if gain < average - 1e-12:
                continue
            ratio = gain / split_info
            if best is None or ratio > best[0] + 1e-12:
                best = (ratio, j, threshold, branches)
        return best[1:]

    # -- routing

    def _route(self, node, X, rows, visit):
        visit(node, rows)
        if node.is_leaf or rows.size == 0:
            return
        col = X[rows, node.attribute]
        missing = np.isnan(col)
        if node.threshold is not None:
            branch = np.where(col <= node.threshold, 0, 1)
        else:
            branch = np.where(missing, 0, col).astype(int)
        branch = np.where(missing, node.default_branch, branch)
        for b, child in enumerate(node.children):
            self._route(child, X, rows[branch == b], visit)

    def _prune(self, node, X, y, rows):
        """Reduced-error pruning; returns the subtree's error on ``rows``."""
        majority = int(np.argmax(node.dist))
        as_leaf = int(np.sum(y[rows] != majority))
        if node.is_leaf:
            return as_leaf
        col = X[rows, node.attribute]
        missing = np.isnan(col)
        if node.threshold is not None:
            branch = np.where(col <= node.threshold, 0, 1)
        else:
            branch = np.where(missing, 0, col).astype(int)
        branch = np.where(missing, node.default_branch, branch)
        subtree = sum(self._prune(child, X, y, rows[branch == b]) for b, child in enumerate(node.children))
        if as_leaf <= subtree:
            node.attribute, node.threshold, node.children = None, None, []
            return as_leaf
        return subtree

    def _number(self, node):
        if node.is_leaf:
            node.leaf_id = len(self.leaves_)
            self.leaves_.append(node)
        for child in node.children:
            self._number(child)

    def leaf_of(self, rows) -> np.ndarray:
        """Leaf id reached by each row."""
        X = np.atleast_2d(np.asarray(rows, dtype=float))
        out = np.empty(X.shape[0], dtype=np.int64)

        def visit(node, r):
            if node.is_leaf:
                out[r] = node.leaf_id

        self._route(self.root_, X, np.arange(X.shape[0]), visit)
        return out

    def _proba(self, X):
        return np.array([self.leaves_[i].dist for i in self.leaf_of(X)])
