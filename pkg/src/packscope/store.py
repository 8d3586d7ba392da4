"""Feature store and dataset manifest persistence.

The store is a comma-separated text table: a version line, a fixed header
``digest,timestamp,label,f1,...,f119`` and one row per sample. Floats are
written with ``repr`` so they read back bit-identical. The manifest is JSON
lines, one record per generated dataset.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from packscope.errors import CorruptRow, FormatVersionMismatch
from packscope.features import N_FEATURES, FeatureVector, Status

FORMAT_VERSION = "feature-store v1"
HEADER = ["digest", "timestamp", "label"] + [f"f{i}" for i in range(1, N_FEATURES + 1)]


@dataclass
class StoreRow:
    digest: str
    timestamp: float
    label: int | None
    values: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, StoreRow):
            return NotImplemented
        return (self.digest == other.digest and self.timestamp == other.timestamp
                and self.label == other.label and np.array_equal(self.values, other.values))


@dataclass
class FeatureStore:
    rows: list[StoreRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    @classmethod
    def from_vectors(cls, vectors, labels=None) -> FeatureStore:
        labels = labels if labels is not None else [None] * len(vectors)
        return cls([StoreRow(v.sample_digest, v.timestamp, lab, np.asarray(v.values, dtype=float))
                    for v, lab in zip(vectors, labels)])

    def matrix(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, N_FEATURES))
        return np.vstack([r.values for r in self.rows])

    def labels(self) -> np.ndarray:
        if any(r.label is None for r in self.rows):
            raise ValueError("store has unlabeled rows")
        return np.array([r.label for r in self.rows], dtype=int)

    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.rows], dtype=float)

    def digests(self) -> list[str]:
        return [r.digest for r in self.rows]

    def vector(self, i: int) -> FeatureVector:
        r = self.rows[i]
        return FeatureVector(r.values.copy(), np.zeros(N_FEATURES, dtype=np.int8) + Status.OK,
                             r.digest, r.timestamp)

    def query(self, time_range: str) -> FeatureStore:
        """Rows whose timestamps fall in ``"YYYY-MM-DD..YYYY-MM-DD"`` (whole end day included)."""
        lo, hi = parse_time_range(time_range)
        return FeatureStore([r for r in self.rows if lo <= r.timestamp <= hi])


def parse_time_range(text: str) -> tuple[float, float]:
    try:
        a, b = text.split("..")
        lo = _day(a)
        hi = _day(b) + 86400 - 1e-6
    except ValueError as exc:
        raise ValueError(f"bad time range {text!r}, expected A..B") from exc
    if hi < lo:
        raise ValueError(f"empty time range {text!r}")
    return lo, hi


def _day(s: str) -> float:
    return datetime.fromisoformat(s.strip()).replace(tzinfo=timezone.utc).timestamp()


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite")
    return str(int(x)) if float(x).is_integer() and abs(x) < 2**53 else repr(float(x))


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_store(store: FeatureStore) -> str:
    lines = [f"# {FORMAT_VERSION}", ",".join(HEADER)]
    seen = set()
    for n, r in enumerate(store.rows, start=3):
        if r.digest in seen:
            raise CorruptRow(n, f"duplicate digest {r.digest}")
        seen.add(r.digest)
        if "," in r.digest or not r.digest:
            raise CorruptRow(n, "digest must be non-empty and comma-free")
        if len(r.values) != N_FEATURES:
            raise CorruptRow(n, f"expected {N_FEATURES} values, got {len(r.values)}")
        try:
            cells = [_fmt(r.timestamp)] + [_fmt(v) for v in r.values]
        except ValueError:
            raise CorruptRow(n, "NaN or infinite value") from None
        label = "" if r.label is None else str(int(r.label))
        lines.append(",".join([r.digest, cells[0], label] + cells[1:]))
    return "\n".join(lines) + "\n"


def loads_store(text: str) -> FeatureStore:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != f"# {FORMAT_VERSION}":
        got = lines[0] if lines else "<empty>"
        raise FormatVersionMismatch(f"expected '# {FORMAT_VERSION}', found {got!r}")
    if len(lines) < 2 or lines[1] != ",".join(HEADER):
        raise CorruptRow(2, "header does not match the fixed column layout")
    rows, seen = [], set()
    for n, line in enumerate(lines[2:], start=3):
        cells = line.split(",")
        if len(cells) != len(HEADER):
            raise CorruptRow(n, f"expected {len(HEADER)} cells, got {len(cells)}")
        digest, ts, label = cells[:3]
        if digest in seen:
            raise CorruptRow(n, f"duplicate digest {digest}")
        seen.add(digest)
        try:
            values = np.array([float(c) for c in cells[3:]])
            stamp = float(ts)
            lab = None if label == "" else int(label)
        except ValueError as exc:
            raise CorruptRow(n, str(exc)) from None
        if not np.all(np.isfinite(values)) or not math.isfinite(stamp):
            raise CorruptRow(n, "NaN or infinite value")
        if lab not in (None, 0, 1):
            raise CorruptRow(n, f"label must be 0 or 1, got {lab}")
        rows.append(StoreRow(digest, stamp, lab, values))
    return FeatureStore(rows)


def save_store(store: FeatureStore, path) -> None:
    _write_atomic(Path(path), dumps_store(store))


def load_store(path) -> FeatureStore:
    return loads_store(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ManifestRecord:
    name: str
    seed: int
    profile_mix: dict
    start: str  # ISO-8601
    end: str
    n_samples: int = 0
    params: dict = field(default_factory=dict)

    @property
    def time_range(self) -> str:
        return f"{self.start[:10]}..{self.end[:10]}"


def write_manifest(records, path) -> None:
    text = "".join(json.dumps(r.__dict__, sort_keys=True) + "\n" for r in records)
    _write_atomic(Path(path), text)


def read_manifest(path) -> list[ManifestRecord]:
    out = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(ManifestRecord(**json.loads(line)))
        except (TypeError, ValueError) as exc:
            raise CorruptRow(n, f"bad manifest record: {exc}") from None
    return out
