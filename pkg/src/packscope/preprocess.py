"""Bucketing and one-hot booleanization, scalers and PCA."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from packscope.errors import BadK, DeletedFeature, EmptyMatrix
from packscope.features import N_FEATURES, FeatureVector

RULES = ("boolean", "deleted", "value", "threshold", "sentinel", "pivot")


@dataclass(frozen=True)
class BucketRule:
    feature_id: int
    rule: str
    params: tuple[float, ...] = ()

    @property
    def n_buckets(self) -> int:
        if self.rule == "boolean":
            return 1
        if self.rule == "deleted":
            return 0
        if self.rule == "value":
            return len(self.params) + 1
        if self.rule == "threshold":
            return len(self.params) + 1
        if self.rule == "sentinel":
            return 2
        return 3  # pivot

    def codes(self, x: np.ndarray) -> np.ndarray:
        """Vectorized bucket codes for an array of raw values."""
        x = np.asarray(x, dtype=float)
        if self.rule == "deleted":
            raise DeletedFeature(f"feature {self.feature_id} is deleted from the bucket table")
        if self.rule == "boolean":
            return (x != 0).astype(int)
        if self.rule == "value":
            out = np.zeros(x.shape, dtype=int)
            # first listed match wins
            for code, v in reversed(list(enumerate(self.params, start=1))):
                out[x == v] = code
            return out
        if self.rule == "threshold":
            return np.searchsorted(np.asarray(self.params), x, side="right")
        if self.rule == "sentinel":
            return (x == self.params[0]).astype(int)
        p = self.params[0]
        return np.where(x < p, 0, np.where(x == p, 1, 2))


@dataclass(frozen=True)
class BucketTable:
    rules: tuple[BucketRule, ...]
    version: int = 1

    def __post_init__(self):
        ids = [r.feature_id for r in self.rules]
        if ids != list(range(1, N_FEATURES + 1)):
            raise ValueError("bucket table must cover feature ids 1..119 exactly once, in order")
        for r in self.rules:
            if r.rule not in RULES:
                raise ValueError(f"unknown bucket rule {r.rule!r}")

    def rule(self, feature_id: int) -> BucketRule:
        if not 1 <= feature_id <= N_FEATURES:
            raise KeyError(feature_id)
        return self.rules[feature_id - 1]

    def group_sizes(self, feature_ids=None) -> list[tuple[int, int]]:
        """(feature id, number of output bits) for every kept feature."""
        ids = range(1, N_FEATURES + 1) if feature_ids is None else feature_ids
        return [(f, self.rule(f).n_buckets) for f in ids if self.rule(f).rule != "deleted"]

    def dimension(self, feature_ids=None) -> int:
        return sum(n for _, n in self.group_sizes(feature_ids))


def load_bucket_table(path=None) -> BucketTable:
    if path is None:
        text = resources.files("packscope").joinpath("data/bucket_table.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    by_id: dict[int, BucketRule] = {}
    for row in doc["rules"]:
        lo, hi = row["ids"]
        kind = row["rule"]
        params: tuple = ()
        if kind == "value":
            params = tuple(float(v) for v in row["values"])
        elif kind == "threshold":
            params = tuple(sorted(float(v) for v in row["cutpoints"]))
        elif kind == "sentinel":
            params = (float(row["sentinel"]),)
        elif kind == "pivot":
            params = (float(row["pivot"]),)
        for fid in range(lo, hi + 1):
            if fid in by_id:
                raise ValueError(f"feature {fid} appears twice in the bucket table")
            by_id[fid] = BucketRule(fid, kind, params)
    return BucketTable(tuple(by_id[i] for i in sorted(by_id)), int(doc.get("version", 1)))


_DEFAULT: BucketTable | None = None


def default_table() -> BucketTable:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_bucket_table()
    return _DEFAULT


def bucketize(feature_id: int, value: float, table: BucketTable | None = None) -> int:
    table = table or default_table()
    return int(table.rule(feature_id).codes(np.array([value]))[0])


def booleanize_matrix(matrix: np.ndarray, feature_ids=None, table: BucketTable | None = None) -> np.ndarray:
    """One-hot encode the columns of ``matrix``; column j holds ``feature_ids[j]``.

    Deleted features are dropped; boolean features stay a single bit.
    """
    table = table or default_table()
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    ids = list(range(1, matrix.shape[1] + 1)) if feature_ids is None else list(feature_ids)
    if len(ids) != matrix.shape[1]:
        raise ValueError("feature_ids length does not match the column count")
    blocks = []
    for j, fid in enumerate(ids):
        r = table.rule(fid)
        if r.rule == "deleted":
            continue
        codes = r.codes(matrix[:, j])
        if r.rule == "boolean":
            blocks.append(codes[:, None].astype(float))
        else:
            blocks.append(np.eye(r.n_buckets)[codes])
    if not blocks:
        return np.zeros((matrix.shape[0], 0))
    return np.hstack(blocks)


def booleanize(v: FeatureVector | np.ndarray, table: BucketTable | None = None) -> np.ndarray:
    values = v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=float)
    return booleanize_matrix(values[None, :], None, table)[0]


@dataclass(frozen=True)
class ScalerModel:
    mode: str
    a: np.ndarray  # min or mean
    b: np.ndarray  # max or std

    @property
    def dimension(self) -> int:
        return len(self.a)


def fit_scaler(mode: str, matrix: np.ndarray) -> ScalerModel:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise EmptyMatrix("cannot fit a scaler on an empty matrix")
    if mode == "minmax":
        return ScalerModel(mode, m.min(axis=0), m.max(axis=0))
    if mode == "zscore":
        return ScalerModel(mode, m.mean(axis=0), m.std(axis=0))
    raise ValueError(f"unknown scaler mode {mode!r}")


def apply_scaler(model: ScalerModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if model.mode == "minmax":
        span = model.b - model.a
        shift, scale = model.a, span
    else:
        shift, scale = model.a, model.b
    ok = scale > 0
    out = np.zeros(np.broadcast(x, shift).shape)
    out[..., ok] = (x[..., ok] - shift[ok]) / scale[ok]
    return out


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x d, orthonormal rows
    explained_variance: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]


def pca_fit(matrix: np.ndarray, k: int) -> PcaModel:
    """Top-``k`` eigenvectors of the sample covariance (ddof=1)."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2:
        raise BadK("PCA needs a 2-D matrix with at least two rows")
    n, d = m.shape
    if not 1 <= k <= min(n, d):
        raise BadK(f"k={k} outside [1, {min(n, d)}]")
    mean = m.mean(axis=0)
    c = m - mean
    cov = c.T @ c / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(-vals, kind="stable")[:k]
    comps = vecs[:, order].T
    # fix the sign so the largest-magnitude loading is positive
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivot])
    signs[signs == 0] = 1.0
    comps = comps * signs[:, None]
    return PcaModel(mean, comps, np.clip(vals[order], 0.0, None))


def pca_transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=float) - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, z: np.ndarray) -> np.ndarray:
    return np.asarray(z, dtype=float) @ model.components + model.mean


PREPROCESS_MODES = ("none", "boolean", "minmax", "zscore")


@dataclass(frozen=True)
class Preprocessor:
    """A fitted preprocessing chain: mode, then (standardize + PCA) if requested."""

    mode: str
    feature_ids: tuple[int, ...]
    scaler: ScalerModel | None = None
    pca_scaler: ScalerModel | None = None
    pca: PcaModel | None = None

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(matrix, dtype=float))
        if self.mode == "boolean":
            x = booleanize_matrix(x, self.feature_ids)
        elif self.scaler is not None:
            x = apply_scaler(self.scaler, x)
        if self.pca is not None:
            x = pca_transform(self.pca, apply_scaler(self.pca_scaler, x))
        return x


def fit_preprocessor(mode: str, matrix: np.ndarray, feature_ids, pca_k: int | None = None) -> Preprocessor:
    if mode not in PREPROCESS_MODES:
        raise ValueError(f"unknown preprocessing mode {mode!r}")
    ids = tuple(int(f) for f in feature_ids)
    x = np.asarray(matrix, dtype=float)
    scaler = fit_scaler(mode, x) if mode in ("minmax", "zscore") else None
    pre = Preprocessor(mode, ids, scaler)
    if not pca_k:
        return pre
    z = pre.transform(x)
    pca_scaler = fit_scaler("zscore", z)
    pca = pca_fit(apply_scaler(pca_scaler, z), pca_k)
    return Preprocessor(mode, ids, scaler, pca_scaler, pca)
