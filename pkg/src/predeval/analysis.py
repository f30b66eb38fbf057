"""Agreement between evaluator scores and closed-loop driving performance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import PerformanceRecord

PERFORMANCE_FIELDS = ("efficiency", "discomfort", "unsafety", "overall")


def pearson(xs, ys) -> float:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-D series of equal length")
    if x.size < 3:
        raise ValueError("pearson needs at least 3 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = np.sqrt(dx @ dx)
    sy = np.sqrt(dy @ dy)
    if sx == 0 or sy == 0:
        raise ValueError("degenerate series: zero variance")
    r = float((dx @ dy) / (sx * sy))
    return max(-1.0, min(1.0, r))


def _check_labels(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(int)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("labels must be binary")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise ValueError("auroc needs both classes present")
    return s, y, n_pos, y.size - n_pos


def auroc(scores, labels) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counted half."""
    s, y, n_pos, n_neg = _check_labels(scores, labels)
    ranks = rankdata(s)  # average ranks: a tie contributes one half
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auroc_pairwise(scores, labels) -> float:
    """O(n^2) reference: count every positive/negative pair."""
    s, y, n_pos, n_neg = _check_labels(scores, labels)
    pos = s[y == 1][:, None]
    neg = s[y == 0][None, :]
    wins = np.count_nonzero(pos > neg) + 0.5 * np.count_nonzero(pos == neg)
    return float(wins / (n_pos * n_neg))


def roc_points(scores, labels) -> np.ndarray:
    """ROC curve vertices (fpr, tpr), sweeping the threshold from high to low."""
    s, y, n_pos, n_neg = _check_labels(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    distinct = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tps = np.cumsum(y)[distinct]
    fps = (distinct + 1) - tps
    return np.column_stack([np.r_[0.0, fps / n_neg], np.r_[0.0, tps / n_pos]])


@dataclass(frozen=True)
class CorrelationCell:
    predictor_id: str
    method: str
    n: int
    r: dict[str, float]
    auroc: float
    roc: np.ndarray = field(repr=False, compare=False, default=None)


@dataclass
class CorrelationReport:
    cells: list[CorrelationCell]
    join_errors: list[str] = field(default_factory=list)

    def cell(self, predictor_id: str, method: str) -> CorrelationCell:
        for c in self.cells:
            if c.predictor_id == predictor_id and c.method == method:
                return c
        raise KeyError((predictor_id, method))

    @property
    def methods(self) -> list[str]:
        return list(dict.fromkeys(c.method for c in self.cells))

    @property
    def predictors(self) -> list[str]:
        return list(dict.fromkeys(c.predictor_id for c in self.cells))

    def mean_r(self, method: str, field_name: str = "overall") -> float:
        return float(np.mean([c.r[field_name] for c in self.cells if c.method == method]))


def _safe_pearson(x, y) -> float:
    try:
        return pearson(x, y)
    except ValueError:
        return float("nan")


def build_report(
    evaluations: Mapping[str, Sequence[tuple[str, str, float]]],
    performances: Mapping[tuple[str, str], PerformanceRecord],
    methods: Sequence[str] | None = None,
    threshold: str | float = "median",
) -> CorrelationReport:
    """One correlation block per (predictor, method).

    ``evaluations`` maps a method name to rows ``(scenario_id,
    predictor_id, value)`` where higher means "better predictor".
    Overall performance is binarized per predictor for AUROC: above the
    predictor's median (or above a fixed ``threshold``) is positive.
    """
    methods = list(methods) if methods is not None else list(evaluations)
    cells, errors = [], []
    for method in methods:
        if method not in evaluations:
            raise KeyError(f"no evaluation rows for method {method!r}")
        seen = {}
        for sid, pid, value in evaluations[method]:
            if (sid, pid) in seen:
                raise ValueError(f"duplicate evaluation key {(sid, pid)}")
            seen[(sid, pid)] = float(value)
        for key in sorted(seen):
            if key not in performances:
                errors.append(f"{method}: no performance record for {key}")
        for key in sorted(performances):
            if key not in seen:
                errors.append(f"{method}: no evaluation for {key}")
        for pid in sorted({k[1] for k in seen}):
            keys = sorted(k for k in seen if k[1] == pid and k in performances)
            vals = np.array([seen[k] for k in keys])
            perf = {f: np.array([getattr(performances[k], f) for k in keys]) for f in PERFORMANCE_FIELDS}
            r = {f: _safe_pearson(vals, perf[f]) for f in PERFORMANCE_FIELDS} if len(keys) >= 3 else \
                {f: float("nan") for f in PERFORMANCE_FIELDS}
            cut = np.median(perf["overall"]) if threshold == "median" else float(threshold)
            labels = (perf["overall"] > cut).astype(int)
            try:
                area = auroc(vals, labels)
                roc = roc_points(vals, labels)
            except ValueError:
                area, roc = float("nan"), np.zeros((0, 2))
            cells.append(CorrelationCell(pid, method, len(keys), r, area, roc))
    return CorrelationReport(cells, errors)
