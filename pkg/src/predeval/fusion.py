"""Criticality-weighted blend of diversity and (negated) displacement error."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import EvaluationRecord, PerformanceRecord
from .metrics import ErrorVariant, MetricRow


class Normalization(str, enum.Enum):
    RAW = "raw"
    ZSCORE = "zscore"
    MINMAX = "minmax"


@dataclass(frozen=True)
class Ablation:
    """``full``, ``fixed_pc`` (constant criticality), ``error_only`` or ``diversity_only``."""

    mode: str = "full"
    value: float = 0.5

    def __post_init__(self):
        if self.mode not in ("full", "fixed_pc", "error_only", "diversity_only"):
            raise ValueError(f"unknown ablation {self.mode!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("fixed_pc value must be in [0, 1]")

    @classmethod
    def parse(cls, text: str) -> "Ablation":
        text = text.strip()
        if text.startswith("fixed_pc"):
            arg = text[len("fixed_pc"):].strip("() ")
            return cls("fixed_pc", float(arg) if arg else 0.5)
        return cls(text)

    @property
    def label(self) -> str:
        return f"fixed_pc({self.value:g})" if self.mode == "fixed_pc" else self.mode


@dataclass(frozen=True)
class FusionConfig:
    normalization: Normalization = Normalization.MINMAX
    error_variant: ErrorVariant = ErrorVariant.ADE
    ablation: Ablation = Ablation()

    def __post_init__(self):
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        object.__setattr__(self, "error_variant", ErrorVariant(self.error_variant))


def normalize(values, mode: Normalization | str = Normalization.MINMAX) -> np.ndarray:
    """Rescale a batch of values; a constant batch maps to zeros under minmax/zscore."""
    v = np.asarray(values, dtype=float)
    mode = Normalization(mode)
    if v.size == 0 or mode is Normalization.RAW:
        return v.copy()
    if mode is Normalization.MINMAX:
        lo, hi = v.min(), v.max()
        if hi <= lo:
            return np.zeros_like(v)
        return (v - lo) / (hi - lo)
    std = v.std()
    if std == 0:
        return np.zeros_like(v)
    return (v - v.mean()) / std


def ed_eva_score(p_c, gad_norm, err_norm):
    """``p_c * gad_norm - (1 - p_c) * err_norm``; error enters negated so higher is better."""
    p_c = np.asarray(p_c, dtype=float)
    out = p_c * np.asarray(gad_norm, dtype=float) - (1.0 - p_c) * np.asarray(err_norm, dtype=float)
    return float(out) if out.ndim == 0 else out


def evaluate_predictor(
    rows: Sequence[MetricRow],
    p_critical: Mapping[str, float] | None,
    config: FusionConfig = FusionConfig(),
    performances: Mapping[tuple[str, str], PerformanceRecord] | None = None,
) -> list[EvaluationRecord]:
    """Fused score for every metric row.

    Normalization runs once over the whole batch of rows. ``p_critical``
    maps scenario_id to the classifier probability and may be ``None``
    only when the ablation does not need it.
    """
    rows = sorted(rows, key=lambda r: (r.scenario_id, r.predictor_id))
    ablation = config.ablation
    if ablation.mode == "full" and p_critical is None:
        raise ValueError("full fusion needs criticality probabilities (no classifier given)")
    gad = np.array([r.gad for r in rows], dtype=float)
    err = np.array([r.error(config.error_variant) for r in rows], dtype=float)
    gad_n = normalize(gad, config.normalization)
    err_n = normalize(err, config.normalization)

    out = []
    for i, r in enumerate(rows):
        if ablation.mode == "full":
            if r.scenario_id not in p_critical:
                raise ValueError(f"missing criticality for scenario {r.scenario_id}")
            pc = float(p_critical[r.scenario_id])
        elif ablation.mode == "fixed_pc":
            pc = ablation.value
        elif ablation.mode == "error_only":
            pc = 0.0
        else:
            pc = 1.0
        score = ed_eva_score(pc, gad_n[i], err_n[i])
        perf = performances.get((r.scenario_id, r.predictor_id)) if performances else None
        out.append(EvaluationRecord(r.scenario_id, r.predictor_id, pc, float(gad[i]), float(err[i]),
                                    float(gad_n[i]), float(err_n[i]), float(score), perf, r.flags))
    return out


def predictor_means(records: Sequence[EvaluationRecord]) -> dict[str, float]:
    """Mean fused score per predictor: the single number used to rank predictors."""
    by = {}
    for r in records:
        by.setdefault(r.predictor_id, []).append(r.score)
    return {k: float(np.mean(v)) for k, v in sorted(by.items())}
