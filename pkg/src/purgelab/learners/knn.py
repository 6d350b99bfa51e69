from __future__ import annotations

import numpy as np

from ..datakit import numeric_ranges
from .base import Model, register_learner, vote_distribution
from .distance import heom, neighbor_order


@register_learner
class KNearestNeighbors(Model):
    """k-nearest neighbours under HEOM with ranges taken from the training data.

    Distance ties go to the lower training index; the returned distribution
    is the neighbour vote share, so the lowest class index wins vote ties.
    """

    learner_id = "knn"
    defaults = {"k": 5}

    def _fit(self, X, y):
        k = self.params["k"]
        if not isinstance(k, int) or k < 1:
            raise ValueError(f"k must be a positive integer, got {k!r}")
        self.X_ = np.array(X)
        self.y_ = np.array(y)
        self.lo_, self.hi_ = numeric_ranges(self.X_, self.categorical)

    def distances(self, X) -> np.ndarray:
        return heom(X, self.X_, self.categorical, self.lo_, self.hi_)

    def neighbors(self, X) -> np.ndarray:
        k = min(self.params["k"], self.X_.shape[0])
        return neighbor_order(self.distances(X))[:, :k]

    def _proba(self, X):
        return vote_distribution(self.y_[self.neighbors(X)], self.n_classes)
