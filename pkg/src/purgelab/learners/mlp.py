from __future__ import annotations

import numpy as np

from ..datakit import numeric_ranges
from ..rng import generator
from .base import Model, register_learner


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@register_learner
class MultilayerPerceptron(Model):
    """One hidden logistic layer, softmax output, cross-entropy loss.

    Weights start uniform in [-0.5, 0.5] from the spec seed and are trained by
    plain mini-batch gradient descent for a fixed number of epochs (no
    momentum, no early stopping). Inputs: numeric min-max scaled on the
    training data with missing cells set to the training mean; categoricals
    one-hot with missing as all zeros.
    """

    learner_id = "mlp"
    defaults = {"hidden": 16, "epochs": 200, "rate": 0.1, "batch": 16}

    def encode(self, X) -> np.ndarray:
        parts = []
        for j in range(X.shape[1]):
            col = X[:, j]
            if self.categorical[j]:
                V = len(self.attributes[j].values)
                onehot = np.zeros((X.shape[0], V))
                known = ~np.isnan(col)
                onehot[np.flatnonzero(known), col[known].astype(int)] = 1.0
                parts.append(onehot)
            else:
                span = self.hi_[j] - self.lo_[j]
                scaled = (col - self.lo_[j]) / span if span > 0 else np.zeros_like(col)
                parts.append(np.where(np.isnan(col), self.fill_[j], scaled)[:, None])
        if not parts:
            return np.zeros((X.shape[0], 0))
        return np.hstack(parts)

    def _fit(self, X, y):
        p = self.params
        hidden, epochs, rate, batch = int(p["hidden"]), int(p["epochs"]), float(p["rate"]), int(p["batch"])
        if hidden < 1 or epochs < 0 or batch < 1 or not rate > 0:
            raise ValueError("mlp needs hidden >= 1, epochs >= 0, batch >= 1, rate > 0")
        self.lo_, self.hi_ = numeric_ranges(X, self.categorical)
        self.fill_ = np.zeros(X.shape[1])
        for j in np.flatnonzero(~self.categorical):
            span = self.hi_[j] - self.lo_[j]
            col = X[:, j]
            known = col[~np.isnan(col)]
            if known.size and span > 0:
                self.fill_[j] = np.mean((known - self.lo_[j]) / span)
        Z = self.encode(X)
        n, d = Z.shape
        C = self.n_classes
        rng = generator(self.seed)
        self.W1 = rng.uniform(-0.5, 0.5, size=(d, hidden))
        self.b1 = rng.uniform(-0.5, 0.5, size=hidden)
        self.W2 = rng.uniform(-0.5, 0.5, size=(hidden, C))
        self.b2 = rng.uniform(-0.5, 0.5, size=C)
        target = np.zeros((n, C))
        target[np.arange(n), y] = 1.0
        for _ in range(epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                h = _sigmoid(Z[idx] @ self.W1 + self.b1)
                out = self._softmax(h @ self.W2 + self.b2)
                g_out = (out - target[idx]) / idx.size
                g_h = (g_out @ self.W2.T) * h * (1.0 - h)
                self.W2 -= rate * (h.T @ g_out)
                self.b2 -= rate * g_out.sum(axis=0)
                self.W1 -= rate * (Z[idx].T @ g_h)
                self.b1 -= rate * g_h.sum(axis=0)

    @staticmethod
    def _softmax(z):
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def _proba(self, X):
        h = _sigmoid(self.encode(X) @ self.W1 + self.b1)
        return self._softmax(h @ self.W2 + self.b2)
