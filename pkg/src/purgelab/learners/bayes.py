from __future__ import annotations

import numpy as np

from .base import Model, register_learner

VAR_FLOOR = 1e-9


@register_learner
class NaiveBayes(Model):
    """Naive Bayes: Gaussian numerics, Laplace-smoothed categoricals.

    Priors are training frequencies, so classes absent from the training data
    get probability zero. Missing cells are skipped attribute by attribute,
    both when counting and when scoring.
    """

    learner_id = "naive-bayes"
    defaults = {}

    def _fit(self, X, y):
        C = self.n_classes
        counts = np.bincount(y, minlength=C).astype(float)
        self.present_ = counts > 0
        with np.errstate(divide="ignore"):
            self.log_prior_ = np.log(counts / counts.sum())
        self.gauss_ = {}
        self.tables_ = {}
        for j in range(X.shape[1]):
            col = X[:, j]
            known = ~np.isnan(col)
            if self.categorical[j]:
                V = len(self.attributes[j].values)
                table = np.ones((C, V))
                np.add.at(table, (y[known], col[known].astype(int)), 1.0)
                self.tables_[j] = np.log(table / table.sum(axis=1, keepdims=True))
            else:
                all_known = col[known]
                fallback = (all_known.mean(), all_known.var()) if all_known.size else (0.0, 1.0)
                mu = np.empty(C)
                var = np.empty(C)
                for c in range(C):
                    vals = col[known & (y == c)]
                    if vals.size:
                        mu[c], var[c] = vals.mean(), vals.var()
                    else:
                        mu[c], var[c] = fallback
                self.gauss_[j] = (mu, np.maximum(var, VAR_FLOOR))

    def joint_log_likelihood(self, X) -> np.ndarray:
        out = np.tile(self.log_prior_, (X.shape[0], 1))
        for j in range(X.shape[1]):
            col = X[:, j]
            known = ~np.isnan(col)
            if not known.any():
                continue
            v = col[known][:, None]
            if self.categorical[j]:
                out[known] += self.tables_[j][:, v[:, 0].astype(int)].T
            else:
                mu, var = self.gauss_[j]
                out[known] += -0.5 * np.log(2 * np.pi * var) - (v - mu) ** 2 / (2 * var)
        return out

    def _proba(self, X):
        jll = self.joint_log_likelihood(X)
        top = jll.max(axis=1, keepdims=True)
        p = np.exp(jll - top)
        return p / p.sum(axis=1, keepdims=True)
