from __future__ import annotations

import numpy as np

from .base import Model, register_learner


def _bucket_numeric(values: np.ndarray, labels: np.ndarray, n_classes: int, min_bucket: int):
    """Holte-style discretisation of one sorted numeric column.

    A bucket closes once its majority class has ``min_bucket`` members, then
    keeps absorbing instances that share the previous value or carry the
    bucket's majority class. Neighbouring buckets with the same majority
    class are merged. Returns (breakpoints, per-bucket class counts).
    """
    m = values.size
    buckets = []
    i = 0
    while i < m:
        counts = np.zeros(n_classes)
        while True:
            counts[labels[i]] += 1
            i += 1
            if i >= m or counts.max() >= min_bucket:
                break
        while i < m and (values[i] == values[i - 1] or labels[i] == np.argmax(counts)):
            counts[labels[i]] += 1
            i += 1
        buckets.append([i, counts])
    merged = [buckets[0]]
    for end, counts in buckets[1:]:
        if np.argmax(counts) == np.argmax(merged[-1][1]):
            merged[-1] = [end, merged[-1][1] + counts]
        else:
            merged.append([end, counts])
    breaks = np.array([(values[end - 1] + values[end]) / 2.0 for end, _ in merged[:-1]])
    return breaks, np.array([c for _, c in merged])


@register_learner
class OneRule(Model):
    """1R: the single attribute whose value-to-majority-class rule has the lowest training error.

    Missing values form a bucket of their own. The class distribution is the
    training class frequency inside the bucket an instance falls in.
    """

    learner_id = "one-rule"
    defaults = {"min_bucket": 6}

    def _fit(self, X, y):
        C = self.n_classes
        min_bucket = int(self.params["min_bucket"])
        if min_bucket < 1:
            raise ValueError("min_bucket must be >= 1")
        self.overall_ = np.bincount(y, minlength=C).astype(float)
        best = None
        for j in range(X.shape[1]):
            col = X[:, j]
            known = ~np.isnan(col)
            missing_counts = np.bincount(y[~known], minlength=C).astype(float)
            if self.categorical[j]:
                table = np.zeros((len(self.attributes[j].values), C))
                np.add.at(table, (col[known].astype(int), y[known]), 1.0)
                rule = ("cat", table, missing_counts)
            elif known.any():
                order = np.argsort(col[known], kind="stable")
                breaks, table = _bucket_numeric(col[known][order], y[known][order], C, min_bucket)
                rule = ("num", breaks, table, missing_counts)
            else:
                table = np.zeros((0, C))
                rule = ("num", np.empty(0), np.zeros((1, C)), missing_counts)
            correct = table.max(axis=1).sum() if table.size else 0.0
            correct += missing_counts.max()
            error = len(y) - correct
            if best is None or error < best[0]:
                best = (error, j, rule)
        self.attribute_ = None if best is None else best[1]
        self.rule_ = None if best is None else best[2]

    def _proba(self, X):
        out = np.tile(self.overall_ / self.overall_.sum(), (X.shape[0], 1))
        if self.attribute_ is None:
            return out
        col = X[:, self.attribute_]
        known = ~np.isnan(col)
        missing_counts = self.rule_[-1]
        if missing_counts.sum() > 0:
            out[~known] = missing_counts / missing_counts.sum()
        if self.rule_[0] == "cat":
            rows = self.rule_[1][col[known].astype(int)]
        else:
            breaks, table = self.rule_[1], self.rule_[2]
            rows = table[np.searchsorted(breaks, col[known], side="left")]
        totals = rows.sum(axis=1, keepdims=True)
        dist = np.where(totals > 0, rows / np.where(totals > 0, totals, 1.0), out[known])
        out[known] = dist
        return out
