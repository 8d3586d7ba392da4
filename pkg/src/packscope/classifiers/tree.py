"""CART decision trees: exhaustive split search, growth and routing.

Splits send ``x[feature] <= threshold`` left, with thresholds at midpoints
between consecutive distinct values. Among splits whose gain is within
``GAIN_TIE`` of the best, the lowest feature index wins, then the lowest
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from packscope.errors import NoSplit

GAIN_TIE = 1e-12


def entropy_bits(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(p), 0.0) + np.where(q > 0, q * np.log2(q), 0.0))
    return h


def gini(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return 2.0 * p * (1.0 - p)


IMPURITY = {"entropy": entropy_bits, "gini": gini}


def _pick(gain: np.ndarray, xs: np.ndarray, features: np.ndarray):
    """Apply the tie rule to a (positions x features) gain table."""
    best = gain.max()
    if not np.isfinite(best):
        return None
    rows, cols = np.nonzero(gain >= best - GAIN_TIE)
    f = features[cols]
    first = f.min()
    i = rows[f == first].min()
    j = cols[f == first][0]
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(first), float(thr), float(gain[i, j])


def _sorted(X: np.ndarray, features: np.ndarray):
    Xf = X[:, features]
    order = np.argsort(Xf, axis=0, kind="stable")
    return order, np.take_along_axis(Xf, order, axis=0)


def class_split(X: np.ndarray, y: np.ndarray, criterion: str, min_leaf: int, features: np.ndarray):
    """Best classification split over ``features`` or None."""
    n = len(y)
    if n < 2:
        return None
    imp = IMPURITY[criterion]
    order, xs = _sorted(X, features)
    c1 = np.cumsum(y[order], axis=0)[:-1]
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    t1 = float(y.sum())
    gain = imp(t1 / n) - (nl * imp(c1 / nl) + nr * imp((t1 - c1) / nr)) / n
    valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    return _pick(np.where(valid, gain, -np.inf), xs, features)


def regression_split(X: np.ndarray, r: np.ndarray, min_leaf: int, features: np.ndarray):
    """Best squared-error split (gain = SSE decrease / n) or None."""
    n = len(r)
    if n < 2:
        return None
    order, xs = _sorted(X, features)
    rs = r[order]
    s = np.cumsum(rs, axis=0)[:-1]
    nl = np.arange(1, n, dtype=float)[:, None]
    nr = n - nl
    tot = float(r.sum())
    # SSE decrease = sl^2/nl + sr^2/nr - tot^2/n
    gain = (s ** 2 / nl + (tot - s) ** 2 / nr - tot ** 2 / n) / n
    valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    return _pick(np.where(valid, gain, -np.inf), xs, features)


def best_split(points, labels, criterion: str = "entropy") -> tuple[int, float, float]:
    """Exhaustive best split of a labelled point set: (feature, threshold, gain)."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[0] == 1 and np.ndim(points) == 1:
        X = X.T
    y = np.asarray(labels, dtype=int)
    if len(np.unique(y)) < 2:
        raise NoSplit("labels are pure")
    got = class_split(X, y, criterion, 1, np.arange(X.shape[1]))
    if got is None:
        raise NoSplit("all points are identical")
    return got


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # leaf label (classification) or leaf score (regression)
    n_samples: np.ndarray
    decrease: np.ndarray   # n_node * impurity decrease at internal nodes

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[self.right[i]] = d[i] + 1
        return int(d.max()) if self.n_nodes else 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def importances(self, d: int) -> np.ndarray:
        out = np.zeros(d)
        inner = self.feature >= 0
        np.add.at(out, self.feature[inner], self.decrease[inner])
        return out


def _n_features(max_features, d: int) -> int:
    if max_features in (None, "all"):
        return d
    if max_features == "sqrt":
        return max(1, int(np.sqrt(d)))
    if max_features == "log2":
        return max(1, int(np.log2(d)))
    return max(1, min(d, int(max_features)))


def grow(X: np.ndarray, target: np.ndarray, *, split: Callable, leaf: Callable, stop: Callable,
         max_depth: int | None, min_leaf: int, max_features=None, rng: np.random.Generator | None = None) -> Tree:
    """Grow a tree depth-first; nodes are numbered in pre-order.

    ``split(X, target, features)`` returns (feature, threshold, gain) or None,
    ``leaf(idx)`` gives a leaf value and ``stop(idx)`` ends growth early.
    """
    n, d = X.shape
    m = _n_features(max_features, d)
    feat, thr, left, right, val, cnt, dec = [], [], [], [], [], [], []

    def new_node(idx) -> int:
        feat.append(-1); thr.append(0.0); left.append(-1); right.append(-1)
        val.append(leaf(idx)); cnt.append(len(idx)); dec.append(0.0)
        return len(feat) - 1

    def build(idx: np.ndarray, depth: int) -> int:
        node = new_node(idx)
        if (max_depth is not None and depth >= max_depth) or len(idx) < 2 * min_leaf or stop(idx):
            return node
        Xn, tn = X[idx], target[idx]
        if m < d:
            cand = np.sort(rng.choice(d, size=m, replace=False))
            got = split(Xn, tn, cand)
            if got is None:
                rest = np.setdiff1d(np.arange(d), cand)
                got = split(Xn, tn, rest) if len(rest) else None
        else:
            got = split(Xn, tn, np.arange(d))
        if got is None:
            return node
        f, t, g = got
        mask = Xn[:, f] <= t
        feat[node], thr[node], dec[node] = f, t, g * len(idx)
        left[node] = build(idx[mask], depth + 1)
        right[node] = build(idx[~mask], depth + 1)
        return node

    build(np.arange(n), 0)
    return Tree(np.array(feat, dtype=int), np.array(thr, dtype=float), np.array(left, dtype=int),
                np.array(right, dtype=int), np.array(val, dtype=float), np.array(cnt, dtype=int),
                np.array(dec, dtype=float))


def majority(y: np.ndarray) -> float:
    """Majority label, ties to 0."""
    return 1.0 if 2 * int(y.sum()) > len(y) else 0.0


def grow_classifier(X, y, criterion="gini", max_depth=None, min_leaf=1, max_features=None, rng=None) -> Tree:
    y = np.asarray(y, dtype=int)
    return grow(
        X, y,
        split=lambda Xn, yn, f: class_split(Xn, yn, criterion, min_leaf, f),
        leaf=lambda idx: majority(y[idx]),
        stop=lambda idx: y[idx].min() == y[idx].max(),
        max_depth=max_depth, min_leaf=min_leaf, max_features=max_features, rng=rng,
    )


@dataclass(frozen=True)
class DecisionTree:
    tree: Tree

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict_value(X).astype(int)

    def importances(self, d: int) -> np.ndarray:
        return self.tree.importances(d)


def fit_dt(X, y, p: dict, rng: np.random.Generator) -> DecisionTree:
    return DecisionTree(grow_classifier(X, y, p["criterion"], p["max_depth"], p["min_leaf"], p["max_features"], rng))
