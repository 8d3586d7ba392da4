"""Random forest (bagging + vote) and gradient-boosted trees (log-loss)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from packscope.classifiers.linear import logistic
from packscope.classifiers.tree import Tree, grow, grow_classifier, regression_split


@dataclass(frozen=True)
class RandomForest:
    trees: tuple[Tree, ...]

    def votes(self, X: np.ndarray) -> np.ndarray:
        return np.sum([t.predict_value(X) for t in self.trees], axis=0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        # majority of member trees, ties to label 0
        return (2 * self.votes(X) > len(self.trees)).astype(int)

    def importances(self, d: int) -> np.ndarray:
        per_tree = []
        for t in self.trees:
            imp = t.importances(d)
            s = imp.sum()
            per_tree.append(imp / s if s > 0 else imp)
        return np.mean(per_tree, axis=0) if per_tree else np.zeros(d)


def fit_rf(X, y, p: dict, rng: np.random.Generator) -> RandomForest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n = len(y)
    trees = []
    for _ in range(p["n_estimators"]):
        idx = rng.integers(0, n, size=n) if p["bootstrap"] else np.arange(n)
        trees.append(grow_classifier(X[idx], y[idx], p["criterion"], p["max_depth"], p["min_leaf"],
                                     p["max_features"], rng))
    return RandomForest(tuple(trees))


@dataclass(frozen=True)
class GradientBoosting:
    init: float
    learning_rate: float
    trees: tuple[Tree, ...]

    def score(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        f = np.full(X.shape[0], self.init)
        for t in self.trees:
            f += self.learning_rate * t.predict_value(X)
        return f

    def predict(self, X: np.ndarray) -> np.ndarray:
        # staged log-odds of label 1
        return (self.score(X) > 0).astype(int)

    def importances(self, d: int) -> np.ndarray:
        total = np.zeros(d)
        for t in self.trees:
            imp = t.importances(d)
            s = imp.sum()
            if s > 0:
                total += imp / s
        return total / len(self.trees) if self.trees else total


def fit_gbdt(X, y, p: dict, rng: np.random.Generator) -> GradientBoosting:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    prior = np.clip(y.mean(), 1e-12, 1 - 1e-12)
    init = float(np.log(prior / (1 - prior)))
    f = np.full(len(y), init)
    trees = []
    lr = p["learning_rate"]
    for _ in range(p["n_estimators"]):
        prob = logistic(f)
        r = y - prob
        h = prob * (1 - prob)

        def leaf(idx, r=r, h=h):
            # one Newton step on the log-loss within the leaf
            den = h[idx].sum()
            return float(r[idx].sum() / den) if den > 1e-12 else 0.0

        t = grow(X, r, split=lambda Xn, rn, feats: regression_split(Xn, rn, p["min_leaf"], feats),
                 leaf=leaf, stop=lambda idx, r=r: np.ptp(r[idx]) == 0.0,
                 max_depth=p["max_depth"], min_leaf=p["min_leaf"])
        trees.append(t)
        f = f + lr * t.predict_value(X)
    return GradientBoosting(init, lr, tuple(trees))
