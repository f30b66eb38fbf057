"""Receding-horizon closed loop: predict, plan, execute one step, advance.

Non-ego agents replay their ground-truth futures; only the ego reacts.
The predictions made at the first step are the ones scored by the
open-loop metrics, since those are the ones with a full ground-truth
future to compare against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..core import EGO_ID, PerformanceRecord, PredictionSet, ScenarioLog, Trajectory
from ..gmm import GmmConstruction
from ..metrics import MetricRow, metric_row
from .performance import PerformanceConfig, driving_performance
from .planner import FrenetState, PlannerConfig, ReferencePath, frenet_plan
from .predictors import HORIZON, PredictorKind, predict

log = logging.getLogger(__name__)


@dataclass(eq=False)
class EpisodeResult:
    scenario_id: str
    predictor_id: str
    ego: Trajectory
    predictions: dict[str, PredictionSet]
    performance: PerformanceRecord
    metrics: MetricRow
    emergency_steps: int = 0
    plan_states: list[FrenetState] = field(default_factory=list)
    error: str | None = None


def initial_state(log: ScenarioLog, path: ReferencePath) -> FrenetState:
    ego = log.agents[EGO_ID][-1]
    s, d, seg = path.to_frenet(ego.position[:2])
    tan, nor = path.tangents[seg], path.normals[seg]
    v, a = ego.velocity[:2], ego.acceleration[:2]
    return FrenetState(s, float(v @ tan), float(a @ tan), d, float(v @ nor), float(a @ nor))


def agent_track(log: ScenarioLog, agent_id: str) -> np.ndarray:
    """History positions followed by the ground-truth future, shape (T_h + T_f, 2)."""
    hist = log.positions(agent_id)[:, :2]
    fut = log.futures[agent_id].points if agent_id in log.futures else np.zeros((0, 2))
    return np.vstack([hist, fut])


def _truth_window(track: np.ndarray, now: int, horizon: int, dt: float) -> np.ndarray:
    """Frames now+1 .. now+horizon of a track, extrapolated at constant velocity past its end."""
    out = track[now + 1: now + 1 + horizon]
    if out.shape[0] < horizon:
        vel = (track[-1] - track[-2]) / dt
        extra = horizon - out.shape[0]
        tail = track[-1] + np.outer(dt * np.arange(1, extra + 1), vel)
        out = np.vstack([out, tail]) if out.size else tail
    return out


def run_episode(
    log: ScenarioLog,
    kind: PredictorKind,
    planner: PlannerConfig = PlannerConfig(),
    performance: PerformanceConfig = PerformanceConfig(),
    construction: GmmConstruction = GmmConstruction(),
    steps: int | None = None,
) -> EpisodeResult:
    path = ReferencePath(log.reference_path)
    others = [a for a in log.agent_ids if a != EGO_ID]
    tracks = {a: agent_track(log, a) for a in others}
    t_h = log.history_length
    n_future = min(len(f) for f in log.futures.values())
    steps = n_future if steps is None else min(steps, n_future)
    nominal = log.ego_speed()

    state = initial_state(log, path)
    executed, states = [], []
    first_predictions: dict[str, PredictionSet] = {}
    emergencies = 0
    for k in range(steps):
        now = t_h - 1 + k
        preds = {}
        for a in others:
            truth = _truth_window(tracks[a], now, HORIZON, log.dt) if kind.needs_truth else None
            preds[a] = predict(kind, tracks[a][: now + 1], a, log.dt, HORIZON, truth,
                               key=(log.seed, log.scenario_id, k))
        if k == 0:
            first_predictions = preds
        plan = frenet_plan(path, state, list(preds.values()), nominal, planner)
        emergencies += int(plan.emergency)
        state = plan.chosen.states[0]
        states.append(state)
        executed.append(path.to_cartesian(state.s, state.d))

    ego = Trajectory(np.array(executed), log.dt)
    perf = driving_performance(ego, log, config=performance)
    row = metric_row(log.scenario_id, kind.id, first_predictions,
                     {a: log.futures[a] for a in others if a in log.futures}, construction, others)
    return EpisodeResult(log.scenario_id, kind.id, ego, first_predictions, perf, row, emergencies, states)


def run_closed_loop(
    scenarios,
    kinds,
    planner: PlannerConfig = PlannerConfig(),
    performance: PerformanceConfig = PerformanceConfig(),
    construction: GmmConstruction = GmmConstruction(),
) -> tuple[list[EpisodeResult], list[tuple[str, str, str]]]:
    """Run every (scenario, predictor) pair.

    Returns the successful episodes sorted by (scenario_id, predictor_id)
    and a list of ``(scenario_id, predictor_id, message)`` failures.
    """
    results, failures = [], []
    for log_ in scenarios:
        for kind in kinds:
            try:
                results.append(run_episode(log_, kind, planner, performance, construction))
            except Exception as exc:  # noqa: BLE001 - recorded and reported, never dropped
                log.warning("scenario %s / %s failed: %s", log_.scenario_id, kind.id, exc)
                failures.append((log_.scenario_id, kind.id, f"{type(exc).__name__}: {exc}"))
    results.sort(key=lambda r: (r.scenario_id, r.predictor_id))
    return results, failures
