from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from packscope.features import N_FEATURES


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with binary labels (1 = packed), timestamps and digests."""

    matrix: np.ndarray
    labels: np.ndarray
    timestamps: np.ndarray | None = None
    digests: tuple[str, ...] | None = None
    feature_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        y = np.asarray(self.labels).astype(int).ravel()
        n = m.shape[0]
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", y)
        if len(y) != n:
            raise ValueError(f"{n} rows but {len(y)} labels")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        ts = np.zeros(n) if self.timestamps is None else np.asarray(self.timestamps, dtype=float)
        if len(ts) != n:
            raise ValueError("timestamps length mismatch")
        object.__setattr__(self, "timestamps", ts)
        dg = tuple(f"row{i}" for i in range(n)) if self.digests is None else tuple(self.digests)
        if len(dg) != n:
            raise ValueError("digests length mismatch")
        object.__setattr__(self, "digests", dg)
        ids = tuple(range(1, m.shape[1] + 1)) if not self.feature_ids else tuple(int(f) for f in self.feature_ids)
        if len(ids) != m.shape[1]:
            raise ValueError("feature_ids length does not match the column count")
        object.__setattr__(self, "feature_ids", ids)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    def rows(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(self.matrix[idx], self.labels[idx], self.timestamps[idx],
                       tuple(self.digests[i] for i in np.arange(len(self))[idx]), self.feature_ids)

    def select_features(self, ids) -> Dataset:
        pos = {f: j for j, f in enumerate(self.feature_ids)}
        cols = [pos[f] for f in ids]
        return Dataset(self.matrix[:, cols], self.labels, self.timestamps, self.digests, tuple(ids))

    def concat(self, other: Dataset) -> Dataset:
        if other.feature_ids != self.feature_ids:
            raise ValueError("feature ids differ")
        return Dataset(np.vstack([self.matrix, other.matrix]), np.concatenate([self.labels, other.labels]),
                       np.concatenate([self.timestamps, other.timestamps]), self.digests + other.digests,
                       self.feature_ids)

    @classmethod
    def from_store(cls, store) -> Dataset:
        return cls(store.matrix(), store.labels(), store.timestamps(), tuple(store.digests()),
                   tuple(range(1, N_FEATURES + 1)))
