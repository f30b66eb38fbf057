"""GMM-area diversity (GAD) and the displacement-error family."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import PredictionSet, Trajectory
from .gmm import GmmConstruction, collapse, diversity_area, endpoint_mixture


class ErrorVariant(str, enum.Enum):
    """Which displacement error instantiation to compute.

    ``ADE``/``FDE`` score the highest-probability mode (mode 0 when no
    probabilities are given); ``aveADE``/``aveFDE`` average over every
    mode; ``minADE``/``minFDE`` take the best single mode.
    """

    ADE = "ADE"
    FDE = "FDE"
    minADE = "minADE"
    minFDE = "minFDE"
    aveADE = "aveADE"
    aveFDE = "aveFDE"


ERROR_VARIANTS = tuple(ErrorVariant)


def per_step_area(pred: PredictionSet, construction: GmmConstruction = GmmConstruction()) -> np.ndarray:
    """sqrt(det) of the collapsed endpoint mixture at every step, shape (T_p,)."""
    return np.array([
        diversity_area(collapse(endpoint_mixture(pred, t, construction)))
        for t in range(pred.horizon)
    ])


def gad(preds: Sequence[PredictionSet], construction: GmmConstruction = GmmConstruction()) -> float:
    """Mean ellipse-area diversity over agents and prediction steps (m^2)."""
    preds = list(preds)
    if not preds:
        raise ValueError("gad needs at least one prediction set")
    horizons = {p.horizon for p in preds}
    if len(horizons) != 1:
        raise ValueError(f"prediction sets disagree on horizon: {sorted(horizons)}")
    return float(np.mean([per_step_area(p, construction) for p in preds]))


def displacement_error(preds: PredictionSet, truth: Trajectory, variant: ErrorVariant | str = ErrorVariant.ADE) -> float:
    variant = ErrorVariant(variant)
    gt = np.asarray(truth.points)
    if preds.horizon != gt.shape[0]:
        raise ValueError(f"horizon mismatch: predictions {preds.horizon} vs truth {gt.shape[0]}")
    dist = np.linalg.norm(preds.modes - gt[None], axis=2)  # (M, T)
    if variant is ErrorVariant.ADE:
        return float(dist[preds.best_mode()].mean())
    if variant is ErrorVariant.FDE:
        return float(dist[preds.best_mode(), -1])
    if variant is ErrorVariant.minADE:
        return float(dist.mean(axis=1).min())
    if variant is ErrorVariant.minFDE:
        return float(dist[:, -1].min())
    if variant is ErrorVariant.aveADE:
        return float(dist.mean())
    return float(dist[:, -1].mean())


def scenario_error(
    predictions: Mapping[str, PredictionSet],
    futures: Mapping[str, Trajectory],
    variant: ErrorVariant | str = ErrorVariant.ADE,
) -> float:
    """Agent-averaged displacement error over the agents that have both."""
    shared = sorted(set(predictions) & set(futures))
    if not shared:
        raise ValueError("no agent has both a prediction and a ground-truth future")
    return float(np.mean([displacement_error(predictions[a], futures[a], variant) for a in shared]))


@dataclass(frozen=True)
class MetricRow:
    scenario_id: str
    predictor_id: str
    gad: float
    errors: dict[str, float]
    flags: tuple[str, ...] = field(default_factory=tuple)

    def error(self, variant: ErrorVariant | str) -> float:
        return self.errors[ErrorVariant(variant).value]


def metric_row(
    scenario_id: str,
    predictor_id: str,
    predictions: Mapping[str, PredictionSet],
    futures: Mapping[str, Trajectory],
    construction: GmmConstruction = GmmConstruction(),
    agents: Iterable[str] | None = None,
) -> MetricRow:
    """GAD and every error variant for one (scenario, predictor) pair.

    ``agents`` lists the agents that should have predictions; any missing
    one is flagged on the row rather than silently skipped.
    """
    expected = sorted(agents) if agents is not None else sorted(futures)
    flags = tuple(f"missing prediction for agent {a}" for a in expected if a not in predictions)
    present = [a for a in expected if a in predictions and a in futures]
    if not present:
        nan = float("nan")
        return MetricRow(scenario_id, predictor_id, nan, {v.value: nan for v in ErrorVariant},
                         flags + ("no evaluable agents",))
    sets = [predictions[a] for a in present]
    errors = {
        v.value: float(np.mean([displacement_error(predictions[a], futures[a], v) for a in present]))
        for v in ErrorVariant
    }
    return MetricRow(scenario_id, predictor_id, gad(sets, construction), errors, flags)


def batch_metrics(inputs: Iterable[tuple], construction: GmmConstruction = GmmConstruction()) -> list[MetricRow]:
    """Metric table over many (scenario, predictor) inputs.

    Each input is ``(scenario_id, predictor_id, predictions, futures)`` or
    the same with a fifth element listing the agents that must be covered.
    Rows come back sorted by ``(scenario_id, predictor_id)``.
    """
    rows = {}
    for item in inputs:
        scenario_id, predictor_id, predictions, futures, *rest = item
        key = (scenario_id, predictor_id)
        if key in rows:
            raise ValueError(f"duplicate evaluation key {key}")
        agents = rest[0] if rest else None
        rows[key] = metric_row(scenario_id, predictor_id, predictions, futures, construction, agents)
    return [rows[k] for k in sorted(rows)]
