"""Cross-validation folds, classification metrics, drift analysis and retraining economics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from packscope.errors import BadK, LengthMismatch, TimeOrder, TooFewPoints, ZeroTrainTime

NA = "N/A"


def kfold_indices(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """``k`` disjoint, shuffled test folds covering 0..n-1; sizes differ by at most one."""
    if not 2 <= k <= n:
        raise BadK(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def fscore(precision: float, recall: float) -> float:
    s = precision + recall
    return 0.0 if s == 0 else 2.0 * precision * recall / s


@dataclass(frozen=True)
class MetricsReport:
    """Confusion counts with "packed" (label 1) as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int
    precision_p: float
    recall_p: float
    fscore_p: float
    precision_np: float
    recall_np: float
    fscore_np: float
    precision_wa: float
    recall_wa: float
    fscore_wa: float
    accuracy: float
    undefined: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def n_p(self) -> int:
        return self.tp + self.fn

    @property
    def n_np(self) -> int:
        return self.tn + self.fp

    def cells(self) -> dict[str, float]:
        names = ("precision_p", "precision_np", "recall_p", "recall_np", "fscore_p", "fscore_np",
                 "precision_wa", "recall_wa", "fscore_wa", "accuracy")
        return {k: getattr(self, k) for k in names}


def _ratio(num: int, den: int, name: str, flags: list) -> float:
    if den == 0:
        flags.append(name)
        return 0.0
    return num / den


def metrics_from_counts(tp: int, fp: int, tn: int, fn: int) -> MetricsReport:
    flags: list[str] = []
    pp = _ratio(tp, tp + fp, "precision_p", flags)
    rp = _ratio(tp, tp + fn, "recall_p", flags)
    pn = _ratio(tn, tn + fn, "precision_np", flags)
    rn = _ratio(tn, tn + fp, "recall_np", flags)
    fp_, fn_ = fscore(pp, rp), fscore(pn, rn)
    if pp + rp == 0:
        flags.append("fscore_p")
    if pn + rn == 0:
        flags.append("fscore_np")
    n = tp + fp + tn + fn
    wp, wn = (tp + fn) / n, (tn + fp) / n
    return MetricsReport(
        tp, fp, tn, fn, pp, rp, fp_, pn, rn, fn_,
        wp * pp + wn * pn, wp * rp + wn * rn, wp * fp_ + wn * fn_,
        (tp + tn) / n, tuple(flags),
    )


def compute_metrics(preds, labels) -> MetricsReport:
    p = np.asarray(preds).astype(int).ravel()
    y = np.asarray(labels).astype(int).ravel()
    if len(p) != len(y):
        raise LengthMismatch(f"{len(p)} predictions for {len(y)} labels")
    if len(y) == 0:
        raise LengthMismatch("no samples")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    tn = int(np.sum((p == 0) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    return metrics_from_counts(tp, fp, tn, fn)


def fit_decay(points) -> tuple[float, float, float]:
    """Least-squares F(t) = a t^2 + b t + c; returns (a, b, c).

    The abscissa is rescaled to [-1, 1] before solving so that second-scale
    times spanning months stay well conditioned.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise TooFewPoints("a quadratic fit needs at least three points")
    t, f = pts[:, 0], pts[:, 1]
    scale = float(np.max(np.abs(t))) or 1.0
    u = t / scale
    A = np.column_stack([u ** 2, u, np.ones_like(u)])
    (a, b, c), *_ = np.linalg.lstsq(A, f, rcond=None)
    return float(a / scale ** 2), float(b / scale), float(c)


def decay_value(coeffs, t):
    a, b, c = coeffs
    t = np.asarray(t, dtype=float)
    return a * t * t + b * t + c


@dataclass(frozen=True)
class NotReached:
    """Uptime has no finite value: the fit starts below the target, or never drops below it."""

    reason: str  # "never_attained" or "beyond_horizon"

    def __str__(self) -> str:
        return NA


def _roots(a: float, b: float, c: float) -> list[float]:
    if a == 0.0:
        return [] if b == 0.0 else [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    out = []
    if q != 0.0:
        out += [q / a, c / q]
    else:
        out += [0.0]
    return sorted(out)


def uptime(coeffs, threshold: float, horizon: float = 10 * 365 * 86400.0) -> float | NotReached:
    """Smallest t >= 0 at which the fitted F-score falls below ``threshold``.

    A fit that is already below the target at t = 0 never attained it, which
    is reported as :class:`NotReached` (the "N/A" cells of an economics table).
    """
    a, b, c = (float(v) for v in coeffs)
    if c < threshold:
        return NotReached("never_attained")
    for r in _roots(a, b, c - threshold):
        if r < 0:
            continue
        slope = 2.0 * a * r + b
        if slope < 0 or (slope == 0 and a < 0):
            return float(r) if r <= horizon else NotReached("beyond_horizon")
    return NotReached("beyond_horizon")


def economics_ratio(uptime_seconds, train_seconds: float):
    """uptime / train time, or "N/A" when the uptime was not reached."""
    if isinstance(uptime_seconds, NotReached):
        return NA
    if not train_seconds > 0:
        raise ZeroTrainTime("training time must be positive")
    return float(uptime_seconds) / float(train_seconds)


@dataclass(frozen=True)
class PeriodResult:
    period_id: str
    t_mid: float
    metrics: MetricsReport
    n: int


@dataclass(frozen=True)
class DriftReport:
    family: str
    baseline: MetricsReport
    periods: tuple[PeriodResult, ...]
    coeffs: tuple[float, float, float] | None
    uptimes: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    train_seconds: float = 0.0
    metric: str = "fscore_wa"

    def points(self) -> list[tuple[float, float]]:
        m = self.metric
        return [(0.0, getattr(self.baseline, m))] + [(p.t_mid, getattr(p.metrics, m)) for p in self.periods]


DAY = 86400.0
ABSCISSAE = ("midpoint", "period_end")


def chronological_eval(model, baseline, periods, thresholds=(0.92, 0.95, 0.97),
                       horizon: float = 10 * 365 * 86400.0, time_ranges=None,
                       metric: str = "fscore_wa", abscissa: str = "midpoint") -> DriftReport:
    """Evaluate one trained model on a baseline set and on later periods, without retraining.

    ``periods`` is a list of (period id, Dataset); ``time_ranges`` (id -> (start, end))
    overrides the range taken from the samples. With ``abscissa="midpoint"`` a
    period sits at the midpoint of its range measured from the model's last
    training timestamp. ``"period_end"`` instead counts whole days from the
    first period's start through the period's last day, so back-to-back
    two-week periods land on 14, 28, 42 and 56 days.
    """
    if abscissa not in ABSCISSAE:
        raise ValueError(f"abscissa must be one of {ABSCISSAE}")
    if metric not in ("fscore_wa", "accuracy"):
        raise ValueError("metric must be fscore_wa or accuracy")
    base = compute_metrics(model.predict_batch(baseline.matrix), baseline.labels)
    spans = {}
    for pid, ds in periods:
        if len(ds) == 0:
            continue
        if float(ds.timestamps.min()) < model.train_end:
            raise TimeOrder(f"period {pid} has samples before the end of training")
        if time_ranges and pid in time_ranges:
            spans[pid] = tuple(float(v) for v in time_ranges[pid])
        else:
            spans[pid] = (float(ds.timestamps.min()), float(ds.timestamps.max()))
    origin = min((lo for lo, _ in spans.values()), default=0.0)
    results = []
    for pid, ds in periods:
        if pid not in spans:
            continue
        lo, hi = spans[pid]
        if abscissa == "midpoint":
            t = (lo + hi) / 2.0 - model.train_end
        else:
            t = math.ceil((hi - origin) / DAY - 1e-9) * DAY
        results.append(PeriodResult(pid, t, compute_metrics(model.predict_batch(ds.matrix), ds.labels), len(ds)))
    results.sort(key=lambda r: r.t_mid)
    report = DriftReport(model.family, base, tuple(results), None, train_seconds=model.train_seconds, metric=metric)
    pts = report.points()
    if len(pts) < 3:
        return report
    coeffs = fit_decay(pts)
    ups = {thr: uptime(coeffs, thr, horizon) for thr in thresholds}
    ratios = {thr: (economics_ratio(u, model.train_seconds) if model.train_seconds > 0 else NA)
              for thr, u in ups.items()}
    return DriftReport(model.family, base, tuple(results), coeffs, ups, ratios, model.train_seconds, metric)


@dataclass(frozen=True)
class Record:
    run_id: str
    family: str
    split: str
    metric: str
    value: object

    def as_dict(self) -> dict:
        v = self.value
        if isinstance(v, NotReached):
            v = NA
        return {"run_id": self.run_id, "family": self.family, "split": self.split, "metric": self.metric, "value": v}


def metric_records(run_id: str, family: str, split: str, report: MetricsReport) -> list[Record]:
    return [Record(run_id, family, split, k, v) for k, v in report.cells().items()]


def format_table(headers, rows) -> str:
    """Plain-text table with right-aligned columns."""
    cells = [[str(h) for h in headers]] + [[_cell(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    line = lambda r: " | ".join(c.rjust(w) for c, w in zip(r, widths))  # noqa: E731
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(cells[0]), sep] + [line(r) for r in cells[1:]])


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.4f}" if abs(v) < 1000 else f"{v:,.0f}"
    return str(v)
