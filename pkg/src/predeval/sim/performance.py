"""Driving-performance score of an executed ego trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import EGO_ID, PerformanceRecord, ScenarioLog, Trajectory, jerk_profile


@dataclass(frozen=True)
class PerformanceConfig:
    collision_gap: float = 1.0
    safety_scale: float = 5.0
    discomfort_cap: float = 5.0
    w_discomfort: float = 0.5
    w_unsafety: float = 2.0


def min_gap(ego_points: np.ndarray, log: ScenarioLog, offset: int = 0) -> float:
    """Smallest centre distance between the ego and any other agent's true future.

    ``ego_points[k]`` is compared with future frame ``k + offset``.
    """
    best = np.inf
    for aid, fut in log.futures.items():
        if aid == EGO_ID:
            continue
        pts = fut.points[offset: offset + len(ego_points)]
        n = min(len(pts), len(ego_points))
        if n:
            best = min(best, float(np.linalg.norm(pts[:n] - ego_points[:n], axis=1).min()))
    return best


def driving_performance(ego: Trajectory, log: ScenarioLog, horizon: int | None = None,
                        config: PerformanceConfig = PerformanceConfig(), start=None) -> PerformanceRecord:
    """Efficiency, discomfort, unsafety and their weighted overall.

    ``ego`` holds the executed positions at future frames 1..H. ``start``
    (the ego position at frame 0) is prepended for progress and jerk;
    by default it is taken from the log.
    """
    pts = np.asarray(ego.points)
    horizon = len(pts) if horizon is None else horizon
    pts = pts[:horizon]
    if start is None:
        start = log.agents[EGO_ID][-1].position[:2]
    path = np.vstack([np.asarray(start, dtype=float)[None, :2], pts])

    progress = float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())
    nominal = log.ego_speed() * horizon * ego.dt
    efficiency = float(np.clip(progress / nominal, 0.0, 1.0)) if nominal > 0 else 1.0

    traj = Trajectory(path, ego.dt)
    discomfort = float(jerk_profile(traj).mean()) if len(traj) >= 4 else 0.0

    gap = min_gap(pts, log)
    if gap < config.collision_gap:
        unsafety = 1.0
    else:
        unsafety = float(max(0.0, 1.0 - gap / config.safety_scale))

    discomfort_norm = min(discomfort / config.discomfort_cap, 1.0)
    overall = efficiency - config.w_discomfort * discomfort_norm - config.w_unsafety * unsafety
    return PerformanceRecord(efficiency, discomfort, unsafety, float(overall))
