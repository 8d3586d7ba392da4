import dataclasses
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from packscope.classifiers import AlgoConfig, Dataset, fit, preset
from packscope.classifiers.linear import LinearModel
from packscope.errors import BadConfig, BadK, UnsupportedFamily, ZeroAccuracy, ZeroTrainTime
from packscope.feature_analysis import (
    ImportanceRanking, RatioResult, importance, iterative_selection, pca_sweep, select_by_threshold,
    time_accuracy_ratio,
)

# (old accuracy, new accuracy, old seconds, new seconds, printed ratio, printed "(-)" marker)
PRINTED_RATIOS = [
    # feature selection
    (0.8476, 0.8480, 4.385, 3.462, 446, True),
    (0.8440, 0.8470, 281.243, 128.804, 152, True),
    (0.8572, 0.8556, 0.1797, 0.0218, 470, False),
    (0.8627, 0.8622, 0.6423, 0.2843, 961.68, False),
    (0.8657, 0.8656, 9.6522, 2.6470, 6283, False),
    # principal components
    (0.8391, 0.8411, 11.97, 0.634462, 397, True),
    (0.2458, 0.8086, 0.145, 0.0201, 0.37, True),
    (0.8476, 0.8513, 4.648, 3.808, 41, True),
    (0.844, 0.8458, 188.713, 153.405, 87.72, True),
    (0.8572, 0.8464, 0.195, 0.0829, 46, False),
    (0.8657, 0.8622, 10.15, 5.13846, 122.33, False),
    (0.8592, 0.8628, 90.392, 85.882, 12, True),
]
# printed as an integer; 12.55 only rounds to it
ROUNDED_RATIO = (0.8627, 0.8589, 0.711, 0.6717, 13)
# accuracy unchanged while time dropped, printed as 1117
UNCHANGED_ACCURACY = (0.8682, 0.8682, 106.72, 92.990)


def _planted(n=300, d=8, seed=0):
    """Only features 1 and 2 carry the label."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    return Dataset(X, y)


# importance

def test_linear_importance_is_coefficient_magnitude(blobs):
    X, y = blobs
    m = fit(AlgoConfig("LR"), Dataset(X[:, :3], y))
    m = dataclasses.replace(m, estimator=LinearModel(np.array([3.0, -4.0, 0.0]), 0.5))
    r = importance(m)
    assert [r.rank(f) for f in (1, 2, 3)] == [2, 1, 3]
    assert [r.score(f) for f in (1, 2, 3)] == [3.0, 4.0, 0.0]


def test_single_split_tree_importance():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 6))
    y = (X[:, 4] > 0.1).astype(int)
    m = fit(AlgoConfig("DT", params={"max_depth": 1, "min_leaf": 2}), Dataset(X, y))
    r = importance(m)
    assert r.score(5) == 1.0
    assert all(r.score(f) == 0.0 for f in (1, 2, 3, 4, 6))
    assert r.rank(5) == 1


def _gini(y):
    if len(y) == 0:
        return 0.0
    p = sum(y) / len(y)
    return 2 * p * (1 - p)


def test_rf_importance_matches_recomputation(blobs):
    X, y = blobs
    cfg = AlgoConfig("RF", params={"n_estimators": 5, "bootstrap": False, "max_features": 2,
                                   "min_leaf": 2, "max_depth": 4}, seed=3)
    m = fit(cfg, Dataset(X, y))
    per_tree = []
    for t in m.estimator.trees:
        # route the training rows and rebuild every node's weighted gini decrease from scratch
        imp = [0.0] * 4
        reach = {0: list(range(len(y)))}
        for node in range(t.n_nodes):
            rows = reach.get(node, [])
            f = int(t.feature[node])
            if f < 0:
                continue
            left = [i for i in rows if X[i, f] <= t.threshold[node]]
            right = [i for i in rows if X[i, f] > t.threshold[node]]
            reach[int(t.left[node])], reach[int(t.right[node])] = left, right
            lab = lambda ids: [int(y[i]) for i in ids]  # noqa: E731
            imp[f] += (len(rows) * _gini(lab(rows)) - len(left) * _gini(lab(left))
                       - len(right) * _gini(lab(right))) / len(y)
        s = sum(imp)
        per_tree.append([v / s for v in imp] if s else imp)
    expected = np.mean(per_tree, axis=0)
    r = importance(m)
    got = [r.score(f) for f in (1, 2, 3, 4)]
    assert np.allclose(got, expected / expected.sum(), atol=1e-12)


@pytest.mark.parametrize("family", ["DT", "RF", "GBDT"])
def test_tree_scores_sum_to_one(family, small_data):
    r = importance(fit(preset(family, seed=1), small_data))
    assert abs(r.scores.sum() - 1.0) <= 1e-9
    assert sorted(r.ranks.tolist()) == list(range(1, len(r.ranks) + 1))


def test_boolean_model_reports_one_score_per_feature(small_data):
    m = fit(preset("LSVM"), small_data)
    r = importance(m)
    assert len(r.feature_ids) == small_data.n_features
    assert sorted(r.ranks.tolist()) == list(range(1, small_data.n_features + 1))


@pytest.mark.parametrize("family", ["KNN", "GNBC", "BNBC", "MLP", "KSVM"])
def test_importance_unsupported(family, blobs):
    X, y = blobs
    m = fit(AlgoConfig(family), Dataset(X, y))
    with pytest.raises(UnsupportedFamily):
        importance(m)


def test_importance_on_components_refused(blobs):
    X, y = blobs
    m = fit(AlgoConfig("LR", "zscore", pca_k=2), Dataset(X, y))
    with pytest.raises(BadConfig):
        importance(m)


def test_importance_invariant_to_row_order(small_data):
    perm = np.random.default_rng(4).permutation(len(small_data))
    a = importance(fit(preset("DT"), small_data))
    b = importance(fit(preset("DT"), small_data.rows(perm)))
    assert np.allclose(a.scores, b.scores, atol=1e-12)


def test_ranking_ties_by_lower_id():
    r = ImportanceRanking.from_scores((4, 2, 9), (0.5, 0.5, 0.7))
    assert r.ordered() == [(9, 0.7), (2, 0.5), (4, 0.5)]
    assert r.top(2) == (2, 9)
    assert r.at_least(0.6) == (9,)


# time / accuracy ratio

@pytest.mark.parametrize("old_acc,new_acc,old_t,new_t,printed,improved", PRINTED_RATIOS)
def test_printed_ratio_cells(old_acc, new_acc, old_t, new_t, printed, improved):
    r = time_accuracy_ratio(old_acc, new_acc, old_t, new_t)
    assert r.magnitude == pytest.approx(printed, rel=0.02)
    assert (r.marker == "(-)") == improved


def test_rounded_and_unchanged_cells():
    *args, printed = ROUNDED_RATIO
    assert abs(time_accuracy_ratio(*args).magnitude - printed) < 0.5
    r = time_accuracy_ratio(*UNCHANGED_ACCURACY)
    assert r.value == math.inf and r.marker == "(-)"


def test_ratio_degenerate_cases():
    assert time_accuracy_ratio(0.9, 0.9, 2.0, 2.0) == RatioResult(0.0, "unchanged")
    assert str(time_accuracy_ratio(0.9, 0.9, 2.0, 2.0)) == "0 (unchanged)"
    same_acc = time_accuracy_ratio(0.9, 0.9, 2.0, 1.0)
    assert same_acc.value == math.inf and same_acc.marker == "(-)"
    better = time_accuracy_ratio(0.8, 0.9, 2.0, 1.0)
    assert better.marker == "(-)" and better.value < 0
    assert str(better).startswith("(-)")
    with pytest.raises(ZeroAccuracy):
        time_accuracy_ratio(0.0, 0.5, 1.0, 1.0)
    with pytest.raises(ZeroTrainTime):
        time_accuracy_ratio(0.5, 0.5, 0.0, 1.0)


@given(st.floats(0.01, 1), st.floats(0, 1), st.floats(1e-3, 100), st.floats(1e-3, 100))
def test_ratio_formula(oa, na, ot, nt):
    r = time_accuracy_ratio(oa, na, ot, nt)
    lost = (oa - na) / oa
    if lost != 0:
        assert r.value == pytest.approx(((ot - nt) / ot) / lost)
        assert (r.marker == "(-)") == (lost < 0)


# threshold selection

def test_threshold_zero_keeps_everything(small_data):
    m = fit(preset("DT"), small_data)
    reps = select_by_threshold(m, small_data, [0.0], folds=3)
    assert reps[0].retained == small_data.feature_ids
    assert abs(reps[0].new_accuracy - reps[0].old_accuracy) <= 1e-12


def test_threshold_above_max_is_skipped(small_data, caplog):
    m = fit(preset("DT"), small_data)
    with caplog.at_level(logging.INFO, logger="packscope.feature_analysis"):
        reps = select_by_threshold(m, small_data, [2.0], folds=3)
    assert reps == []
    assert "no feature reaches the threshold" in caplog.text


@settings(max_examples=10)
@given(st.integers(0, 1000))
def test_threshold_selection_properties(seed):
    data = _planted(120, 6, seed)
    m = fit(AlgoConfig("DT", params={"max_depth": 4, "min_leaf": 3}), data)
    thresholds = [0.0, 0.01, 0.05, 0.1, 0.3]
    reps = select_by_threshold(m, data, thresholds, max_acc_drop=0.05, folds=3, seed=seed)
    sizes = [r.n_features for r in reps]
    assert sizes == sorted(sizes, reverse=True)
    for r in reps:
        assert r.accuracy_drop <= 0.05
        assert set(r.retained) <= set(range(1, 7))
    ranking = importance(m)
    all_sizes = [len(ranking.at_least(t)) for t in thresholds]
    assert all_sizes == sorted(all_sizes, reverse=True)


# iterative selection

def test_iterative_with_full_k_keeps_everything():
    data = _planted()
    rep = iterative_selection(AlgoConfig("LR"), data, schedule=(8, 8), folds=3)
    assert rep.retained == data.feature_ids
    assert rep.method == "iterative"


def test_iterative_finds_planted_signal():
    data = _planted()
    rep = iterative_selection(AlgoConfig("LR"), data, schedule=(6, 4, 3), folds=3)
    assert {1, 2} <= set(rep.retained) and len(rep.retained) <= 3
    assert rep.new_accuracy >= 0.95


def test_iterative_is_idempotent():
    data = _planted(seed=5)
    cfg = AlgoConfig("DT", params={"max_depth": 4, "min_leaf": 3})
    rep = iterative_selection(cfg, data, schedule=(5, 3), folds=3)
    again = iterative_selection(cfg, data.select_features(rep.retained), schedule=(5, 3), folds=3)
    assert again.retained == rep.retained


def test_iterative_rejects_bad_k():
    with pytest.raises(BadK):
        iterative_selection(AlgoConfig("LR"), _planted(), schedule=(0,), folds=3)


# PCA sweep

def test_pca_sweep_shape_and_best(small_data):
    cfg = preset("KNN")
    sw = pca_sweep(cfg, small_data, [1, 5, 20], folds=3)
    assert [r.k for r in sw.rows] == [1, 5, 20]
    assert sw.best in sw.rows
    faster = [r for r in sw.rows if r.seconds < sw.old_seconds] or list(sw.rows)
    assert sw.best.accuracy == max(r.accuracy for r in faster)


@pytest.mark.parametrize("family", ["BNBC", "DL85"])
def test_pca_ineligible(family, small_data):
    with pytest.raises(UnsupportedFamily):
        pca_sweep(preset(family), small_data, [2], folds=3)


def test_pca_bad_k(small_data):
    with pytest.raises(BadK):
        pca_sweep(preset("DT"), small_data, [0], folds=3)
    with pytest.raises(BadK):
        pca_sweep(preset("DT"), small_data, [120], folds=3)
    # booleanized input is wider than the raw vector
    pca_sweep(preset("KNN"), small_data, [150], folds=2)


def test_pca_full_rank_keeps_knn_accuracy():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 5))
    y = (X[:, 0] - X[:, 2] > 0).astype(int)
    data = Dataset(X, y)
    cfg = AlgoConfig("KNN", "zscore", {"k": 5})
    sw = pca_sweep(cfg, data, [5], folds=5)
    assert abs(sw.rows[0].accuracy - sw.old_accuracy) <= 0.02


def test_pca_one_component_on_planted_direction():
    rng = np.random.default_rng(8)
    n = 300
    s = rng.normal(size=n) * 5
    X = np.column_stack([s, s, rng.normal(size=(n, 4)) * 0.5]) + rng.normal(scale=0.1, size=(n, 6))
    y = (s > 0).astype(int)
    sw = pca_sweep(AlgoConfig("KNN", "none", {"k": 5}), Dataset(X, y), [1], folds=5)
    assert sw.rows[0].accuracy >= 0.9
