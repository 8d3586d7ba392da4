"""One fit / predict contract over every family, plus cross-validated grid search."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from packscope.classifiers.bayes import fit_bnbc, fit_gnbc
from packscope.classifiers.config import AlgoConfig
from packscope.classifiers.data import Dataset
from packscope.classifiers.ensemble import fit_gbdt, fit_rf
from packscope.classifiers.knn import fit_knn
from packscope.classifiers.ksvm import fit_ksvm
from packscope.classifiers.linear import fit_lr, fit_lsvm
from packscope.classifiers.mlp import fit_mlp
from packscope.classifiers.tree import fit_dt
from packscope.errors import DimensionMismatch, OutOfGrid, SingleClass, UnsupportedFamily
from packscope.features import N_FEATURES, FeatureVector
from packscope.preprocess import Preprocessor, fit_preprocessor

TRAINERS = {
    "KNN": fit_knn, "GNBC": fit_gnbc, "BNBC": fit_bnbc, "LR": fit_lr, "LSVM": fit_lsvm,
    "DT": fit_dt, "RF": fit_rf, "GBDT": fit_gbdt, "MLP": fit_mlp, "KSVM": fit_ksvm,
}


@dataclass(frozen=True)
class Model:
    family: str
    config: AlgoConfig
    preprocessor: Preprocessor
    estimator: object
    feature_ids: tuple[int, ...]
    train_seconds: float = 0.0
    train_end: float = 0.0
    out_of_grid: tuple[str, ...] = ()
    n_train: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_inputs(self) -> int:
        return len(self.feature_ids)

    def _inputs(self, X) -> np.ndarray:
        if isinstance(X, FeatureVector):
            X = X.values
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        d = X.shape[1]
        if d == self.n_inputs:
            return X
        if d == N_FEATURES:
            return X[:, [f - 1 for f in self.feature_ids]]
        raise DimensionMismatch(f"model expects {self.n_inputs} features (or all {N_FEATURES}), got {d}")

    def transform(self, X) -> np.ndarray:
        return self.preprocessor.transform(self._inputs(X))

    def predict_batch(self, X) -> np.ndarray:
        Z = self.transform(X)
        if Z.shape[0] == 0:
            return np.zeros(0, dtype=int)
        return np.asarray(self.estimator.predict(Z), dtype=int)

    def predict(self, x) -> int:
        return int(self.predict_batch(x)[0])


def fit(config: AlgoConfig, data: Dataset) -> Model:
    if config.family == "DL85":
        raise UnsupportedFamily("DL85 is a configuration slot only; it has no trainer")
    if len(data) == 0:
        raise SingleClass("empty training set")
    if config.family != "KNN" and len(np.unique(data.labels)) < 2:
        raise SingleClass(f"{config.family} needs both classes in the training data")
    bad = config.out_of_grid()
    if bad:
        warnings.warn(OutOfGrid(f"{config.family} hyperparameters outside the tuning grid: {bad}"), stacklevel=2)
    rng = np.random.default_rng(config.seed)
    t0 = time.perf_counter()
    pre = fit_preprocessor(config.preprocessing, data.matrix, data.feature_ids, config.pca_k)
    Z = pre.transform(data.matrix)
    est = TRAINERS[config.family](Z, data.labels, config.resolved(), rng)
    elapsed = time.perf_counter() - t0
    return Model(config.family, config, pre, est, data.feature_ids, elapsed,
                 float(data.timestamps.max()) if len(data) else 0.0, tuple(bad), len(data))


def predict(model: Model, x) -> int:
    return model.predict(x)


def predict_batch(model: Model, matrix) -> np.ndarray:
    return model.predict_batch(matrix)


@dataclass(frozen=True)
class GridCell:
    config: AlgoConfig
    accuracy: float | None
    train_seconds: float | None
    fold_accuracies: tuple[float, ...] = ()
    error: str = ""

    @property
    def failed(self) -> bool:
        return self.accuracy is None


def cross_validate(config: AlgoConfig, data: Dataset, folds: int, seed: int) -> tuple[list[float], list[float]]:
    """Per-fold accuracies and fit times."""
    from packscope.evaluation import kfold_indices

    accs, times = [], []
    all_idx = np.arange(len(data))
    for test in kfold_indices(len(data), folds, seed):
        train = np.setdiff1d(all_idx, test)
        m = fit(config, data.rows(train))
        pred = m.predict_batch(data.matrix[test])
        accs.append(float(np.mean(pred == data.labels[test])))
        times.append(m.train_seconds)
    return accs, times


def grid_search(grid, data: Dataset, folds: int = 10, seed: int = 0) -> tuple[AlgoConfig | None, list[GridCell]]:
    """Mean k-fold accuracy for every config; best by accuracy, then by lower mean train time."""
    cells = []
    for cfg in grid:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", OutOfGrid)
                accs, times = cross_validate(cfg, data, folds, seed)
            cells.append(GridCell(cfg, float(np.mean(accs)), float(np.mean(times)), tuple(accs)))
        except Exception as exc:  # recorded as a failed cell
            cells.append(GridCell(cfg, None, None, (), f"{type(exc).__name__}: {exc}"))
    best = pick_best(cells)
    return (best.config if best else None), cells


def pick_best(cells) -> GridCell | None:
    ok = [c for c in cells if not c.failed]
    if not ok:
        return None
    top = max(c.accuracy for c in ok)
    tied = [c for c in ok if c.accuracy >= top - 1e-12]
    return min(tied, key=lambda c: c.train_seconds)
