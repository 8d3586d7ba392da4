"""Feature relevance: importances, importance-threshold and iterative selection, PCA sweeps."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from packscope.classifiers.config import AlgoConfig
from packscope.classifiers.core import Model, cross_validate, fit
from packscope.classifiers.data import Dataset
from packscope.errors import (
    BadConfig, BadK, EmptySelection, UnsupportedFamily, ZeroAccuracy, ZeroTrainTime,
)
from packscope.preprocess import default_table

log = logging.getLogger(__name__)

LINEAR = ("LR", "LSVM")
TREES = ("DT", "RF", "GBDT")
PCA_INELIGIBLE = ("BNBC", "DL85")
DEFAULT_SCHEDULE = (110, 90, 70, 50)


@dataclass(frozen=True)
class ImportanceRanking:
    feature_ids: tuple[int, ...]
    scores: np.ndarray
    ranks: np.ndarray  # 1 = most important; equal scores rank by lower feature id

    @classmethod
    def from_scores(cls, feature_ids, scores) -> ImportanceRanking:
        ids = tuple(int(f) for f in feature_ids)
        s = np.asarray(scores, dtype=float)
        order = np.lexsort((np.asarray(ids), -s))
        ranks = np.empty(len(ids), dtype=int)
        ranks[order] = np.arange(1, len(ids) + 1)
        return cls(ids, s, ranks)

    def score(self, fid: int) -> float:
        return float(self.scores[self.feature_ids.index(fid)])

    def rank(self, fid: int) -> int:
        return int(self.ranks[self.feature_ids.index(fid)])

    def top(self, k: int) -> tuple[int, ...]:
        """The ``k`` best feature ids, in ascending id order."""
        return tuple(sorted(f for f, r in zip(self.feature_ids, self.ranks) if r <= k))

    def at_least(self, threshold: float) -> tuple[int, ...]:
        return tuple(f for f, s in zip(self.feature_ids, self.scores) if s >= threshold)

    def ordered(self) -> list[tuple[int, float]]:
        return sorted(zip(self.feature_ids, self.scores.tolist()), key=lambda p: self.rank(p[0]))


def _column_groups(model: Model) -> list[int]:
    """Number of estimator input columns behind each of the model's features."""
    pre = model.preprocessor
    if pre.mode != "boolean":
        return [1] * len(model.feature_ids)
    sizes = dict(default_table().group_sizes(model.feature_ids))
    return [sizes.get(f, 0) for f in model.feature_ids]


def importance(model: Model) -> ImportanceRanking:
    """|w| for linear models, normalized impurity decrease for tree models.

    Booleanized models report one score per feature: the sum over its bucket
    columns.
    """
    fam = model.family
    if fam not in LINEAR + TREES:
        raise UnsupportedFamily(f"{fam} exposes neither coefficients nor importances")
    if model.preprocessor.pca is not None:
        raise BadConfig("importances on principal components do not map back to features")
    groups = _column_groups(model)
    cols = model.estimator.importances(sum(groups))
    bounds = np.cumsum([0] + groups)
    scores = np.array([cols[a:b].sum() for a, b in zip(bounds[:-1], bounds[1:])])
    if fam in TREES:
        total = scores.sum()
        if total > 0:
            scores = scores / total
    return ImportanceRanking.from_scores(model.feature_ids, scores)


@dataclass(frozen=True)
class RatioResult:
    value: float
    marker: str = ""  # "", "(-)" when accuracy did not drop, "unchanged"

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    def __str__(self) -> str:
        if self.marker == "unchanged":
            return "0 (unchanged)"
        return f"{self.marker}{self.magnitude:.4g}"


def time_accuracy_ratio(old_acc: float, new_acc: float, old_time: float, new_time: float) -> RatioResult:
    """Relative time saved over relative accuracy lost."""
    if not old_acc > 0:
        raise ZeroAccuracy("old accuracy must be positive")
    if not old_time > 0:
        raise ZeroTrainTime("old training time must be positive")
    saved = (old_time - new_time) / old_time
    lost = (old_acc - new_acc) / old_acc
    if lost == 0:
        if saved == 0:
            return RatioResult(0.0, "unchanged")
        return RatioResult(math.copysign(math.inf, saved), "(-)")
    value = saved / lost
    return RatioResult(value, "(-)" if lost < 0 else "")


@dataclass(frozen=True)
class SelectionReport:
    method: str  # "k_best_threshold" or "iterative"
    family: str
    retained: tuple[int, ...]
    old_accuracy: float
    new_accuracy: float
    old_seconds: float
    new_seconds: float
    ratio: RatioResult
    parameter: object = None  # the threshold, or the k schedule

    @property
    def n_features(self) -> int:
        return len(self.retained)

    @property
    def accuracy_drop(self) -> float:
        return (self.old_accuracy - self.new_accuracy) / self.old_accuracy

    def as_dict(self) -> dict:
        return {
            "method": self.method, "family": self.family, "n_features": self.n_features,
            "retained": list(self.retained), "old_accuracy": self.old_accuracy,
            "new_accuracy": self.new_accuracy, "old_seconds": self.old_seconds,
            "new_seconds": self.new_seconds, "ratio": str(self.ratio), "parameter": self.parameter,
        }


def _cv(config: AlgoConfig, data: Dataset, folds: int, seed: int) -> tuple[float, float]:
    accs, times = cross_validate(config, data, folds, seed)
    return float(np.mean(accs)), float(np.mean(times))


def _report(method, config, data, kept, base, folds, seed, parameter) -> SelectionReport:
    acc, secs = _cv(config, data.select_features(kept), folds, seed)
    return SelectionReport(method, config.family, tuple(kept), base[0], acc, base[1], secs,
                           time_accuracy_ratio(base[0], acc, base[1], secs), parameter)


def select_by_threshold(model: Model, data: Dataset, thresholds, max_acc_drop: float = 0.05,
                        folds: int = 10, seed: int = 0) -> list[SelectionReport]:
    """Retrain on the features scoring at least each threshold.

    Accuracies are mean k-fold CV accuracies and times are mean per-fold fit
    times. Thresholds that keep nothing, or whose relative accuracy drop
    exceeds ``max_acc_drop``, are logged and left out of the result.
    """
    ranking = importance(model)
    data = data.select_features(model.feature_ids)
    base = _cv(model.config, data, folds, seed)
    out = []
    for thr in sorted(thresholds):
        kept = ranking.at_least(thr)
        if not kept:
            log.info("threshold %g skipped: %s", thr, EmptySelection("no feature reaches the threshold"))
            continue
        rep = _report("k_best_threshold", model.config, data, kept, base, folds, seed, float(thr))
        if rep.accuracy_drop > max_acc_drop:
            log.info("threshold %g skipped: accuracy drop %.4f", thr, rep.accuracy_drop)
            continue
        out.append(rep)
    return out


def iterative_selection(config: AlgoConfig, data: Dataset, schedule=DEFAULT_SCHEDULE,
                        folds: int = 10, seed: int = 0) -> SelectionReport:
    """Shrink the feature set through the top-k lists of successive retrainings.

    Each pass trains on the running set, takes its ``k`` best features and
    intersects them with the running set; the loop ends once a pass leaves the
    set unchanged or the schedule runs out.
    """
    running = tuple(data.feature_ids)
    for k in schedule:
        if k < 1:
            raise BadK(f"schedule entries must be positive, got {k}")
        model = fit(config, data.select_features(running))
        top = set(importance(model).top(k))
        nxt = tuple(f for f in running if f in top)
        if nxt == running:
            break
        running = nxt
    base = _cv(config, data, folds, seed)
    return _report("iterative", config, data, running, base, folds, seed, tuple(schedule))


@dataclass(frozen=True)
class PcaRow:
    k: int
    accuracy: float
    seconds: float
    ratio: RatioResult


@dataclass(frozen=True)
class PcaSweep:
    family: str
    old_accuracy: float
    old_seconds: float
    rows: tuple[PcaRow, ...]
    best: PcaRow | None


def _input_width(config: AlgoConfig, data: Dataset) -> int:
    if config.preprocessing == "boolean":
        return default_table().dimension(data.feature_ids)
    return data.n_features


def pca_sweep(config: AlgoConfig, data: Dataset, ks, folds: int = 10, seed: int = 0) -> PcaSweep:
    """Cross-validate ``config`` with k principal components for every k.

    The best row is the most accurate among those that train faster than the
    unreduced model; if none does, the most accurate overall. Ties go to the
    faster row.
    """
    if config.family in PCA_INELIGIBLE:
        raise UnsupportedFamily(f"{config.family} needs binary inputs and cannot take components")
    ks = list(ks)
    width = _input_width(config, data)
    n_train = len(data) - -(-len(data) // folds)
    for k in ks:
        if not 1 <= k <= min(width, n_train):
            raise BadK(f"k={k} outside 1..{min(width, n_train)}")
    base_cfg = replace(config, pca_k=None)
    old_acc, old_secs = _cv(base_cfg, data, folds, seed)
    rows = []
    for k in ks:
        acc, secs = _cv(replace(config, pca_k=int(k)), data, folds, seed)
        rows.append(PcaRow(int(k), acc, secs, time_accuracy_ratio(old_acc, acc, old_secs, secs)))
    faster = [r for r in rows if r.seconds < old_secs] or rows
    best = min(faster, key=lambda r: (-r.accuracy, r.seconds)) if faster else None
    return PcaSweep(config.family, old_acc, old_secs, tuple(rows), best)
