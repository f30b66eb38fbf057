"""Sampling-based Frenet-frame planner.

Candidates pair a quintic lateral profile (to a target offset) with a
quartic longitudinal profile (to a target speed) over the prediction
horizon. Each candidate is scored against every predicted mode of every
agent; the cheapest wins. When every sampled candidate conflicts with
some mode, a maximum-braking fallback is returned and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import DEFAULT_DT, Trajectory

LATERAL_GRID = (-3.0, -1.5, 0.0, 1.5, 3.0)
SPEED_FACTORS = (0.5, 0.75, 1.0, 1.25)


@dataclass(frozen=True)
class PlannerConfig:
    lateral_grid: tuple[float, ...] = LATERAL_GRID
    speed_factors: tuple[float, ...] = SPEED_FACTORS
    horizon: int = 15
    dt: float = DEFAULT_DT
    maneuver_time: float = 2.0
    w_jerk: float = 0.01
    w_offset: float = 1.0
    w_speed: float = 0.5
    w_collision: float = 50.0
    collision_radius: float = 2.0
    max_brake: float = 8.0


class ReferencePath:
    """Arc-length parameterized polyline with piecewise-constant normals."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ValueError("reference path needs at least two vertices")
        seg = np.diff(pts, axis=0)
        length = np.linalg.norm(seg, axis=1)
        keep = length > 1e-12
        self.points = np.vstack([pts[:1], pts[1:][keep]])
        seg = seg[keep]
        length = length[keep]
        self.tangents = seg / length[:, None]
        self.normals = np.stack([-self.tangents[:, 1], self.tangents[:, 0]], axis=1)
        self.s_breaks = np.concatenate([[0.0], np.cumsum(length)])

    @property
    def length(self) -> float:
        return float(self.s_breaks[-1])

    def _segment(self, s):
        return np.clip(np.searchsorted(self.s_breaks, s, side="right") - 1, 0, len(self.tangents) - 1)

    def to_cartesian(self, s, d) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        d = np.asarray(d, dtype=float)
        i = self._segment(s)
        base = self.points[i] + (s - self.s_breaks[i])[..., None] * self.tangents[i]
        return base + d[..., None] * self.normals[i]

    def to_frenet(self, xy) -> tuple[float, float, int]:
        """Project a point onto the nearest segment; returns (s, d, segment)."""
        p = np.asarray(xy, dtype=float)[:2]
        a = self.points[:-1]
        rel = p - a
        along = np.clip((rel * self.tangents).sum(axis=1), 0.0, np.diff(self.s_breaks))
        foot = a + along[:, None] * self.tangents
        i = int(np.argmin(np.linalg.norm(p - foot, axis=1)))
        # extend the end segments so points beyond the path still project linearly
        t_along = float(rel[i] @ self.tangents[i])
        if 0 < i < len(self.tangents) - 1:
            t_along = float(along[i])
        return float(self.s_breaks[i] + t_along), float(rel[i] @ self.normals[i]), i


@dataclass(frozen=True)
class FrenetState:
    s: float
    s_d: float
    s_dd: float
    d: float
    d_d: float
    d_dd: float


def quintic_coeffs(x0, v0, a0, x1, v1, a1, T) -> np.ndarray:
    """Coefficients c0..c5 of the quintic matching position/velocity/acceleration at 0 and T."""
    c0, c1, c2 = x0, v0, a0 / 2.0
    m = np.array([[T**3, T**4, T**5], [3 * T**2, 4 * T**3, 5 * T**4], [6 * T, 12 * T**2, 20 * T**3]])
    rhs = np.array([x1 - c0 - c1 * T - c2 * T**2, v1 - c1 - 2 * c2 * T, a1 - 2 * c2])
    return np.concatenate([[c0, c1, c2], np.linalg.solve(m, rhs)])


def quartic_coeffs(x0, v0, a0, v1, a1, T) -> np.ndarray:
    """Coefficients c0..c4 of the quartic matching x0, v0, a0 at 0 and v1, a1 at T."""
    c0, c1, c2 = x0, v0, a0 / 2.0
    m = np.array([[3 * T**2, 4 * T**3], [6 * T, 12 * T**2]])
    rhs = np.array([v1 - c1 - 2 * c2 * T, a1 - 2 * c2])
    return np.concatenate([[c0, c1, c2], np.linalg.solve(m, rhs)])


def _poly_eval(coeffs: np.ndarray, t: np.ndarray, deriv: int = 0) -> np.ndarray:
    c = np.polynomial.polynomial.polyder(coeffs, deriv) if deriv else coeffs
    return np.polynomial.polynomial.polyval(t, c)


def _jerk_integral(coeffs: np.ndarray, T: float) -> float:
    jerk = np.polynomial.polynomial.polyder(coeffs, 3)
    sq = np.polynomial.polynomial.polymul(jerk, jerk)
    anti = np.polynomial.polynomial.polyint(sq)
    return float(np.polynomial.polynomial.polyval(T, anti))


@dataclass(eq=False)
class FrenetCandidate:
    lateral_target: float
    target_speed: float
    trajectory: Trajectory
    states: list[FrenetState]
    cost: tuple[float, float, float]
    emergency: bool = False
    colliding: bool = False

    @property
    def total_cost(self) -> float:
        return float(sum(self.cost))


@dataclass(eq=False)
class PlanResult:
    chosen: FrenetCandidate
    candidates: list[FrenetCandidate] = field(default_factory=list)

    @property
    def emergency(self) -> bool:
        return self.chosen.emergency


def _obstacle_array(predictions, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack all predicted modes as (K, horizon, 2) points with weights (K,)."""
    pts, w = [], []
    for pred in predictions:
        modes = np.asarray(pred.modes)
        if modes.shape[1] < horizon:
            pad = np.repeat(modes[:, -1:, :], horizon - modes.shape[1], axis=1)
            modes = np.concatenate([modes, pad], axis=1)
        pts.append(modes[:, :horizon])
        w.append(pred.weights())
    if not pts:
        return np.zeros((0, horizon, 2)), np.zeros(0)
    return np.concatenate(pts), np.concatenate(w)


def _collision_cost(xy: np.ndarray, obstacles: np.ndarray, weights: np.ndarray, radius: float) -> float:
    if obstacles.shape[0] == 0:
        return 0.0
    gaps = np.linalg.norm(obstacles - xy[None], axis=2).min(axis=1)
    return float(weights[gaps < radius].sum())


def _build(path: ReferencePath, state: FrenetState, d_target: float, v_target: float,
           cfg: PlannerConfig, nominal_speed: float, obstacles, weights) -> FrenetCandidate:
    T = max(cfg.maneuver_time, cfg.horizon * cfg.dt)
    t = cfg.dt * np.arange(1, cfg.horizon + 1)
    lat = quintic_coeffs(state.d, state.d_d, state.d_dd, d_target, 0.0, 0.0, T)
    lon = quartic_coeffs(state.s, state.s_d, state.s_dd, v_target, 0.0, T)
    s = _poly_eval(lon, t)
    d = _poly_eval(lat, t)
    states = [
        FrenetState(*vals) for vals in zip(
            s, _poly_eval(lon, t, 1), _poly_eval(lon, t, 2), d, _poly_eval(lat, t, 1), _poly_eval(lat, t, 2)
        )
    ]
    xy = path.to_cartesian(s, d)
    jerk = cfg.w_jerk * (_jerk_integral(lat, T) + _jerk_integral(lon, T))
    deviation = cfg.w_offset * abs(d_target) + cfg.w_speed * abs(v_target - nominal_speed)
    hit = _collision_cost(xy, obstacles, weights, cfg.collision_radius)
    return FrenetCandidate(d_target, v_target, Trajectory(xy, cfg.dt), states,
                           (jerk, deviation, cfg.w_collision * hit), colliding=hit > 0)


def _emergency(path: ReferencePath, state: FrenetState, cfg: PlannerConfig, nominal_speed: float,
               obstacles, weights) -> FrenetCandidate:
    """Hold the lateral position and stop with peak deceleration ``max_brake``."""
    v0 = max(state.s_d, 0.0)
    # the quartic speed profile v0 -> 0 peaks at 1.5 * v0 / T deceleration
    T = max(1.5 * v0 / cfg.max_brake, cfg.dt)
    t = cfg.dt * np.arange(1, cfg.horizon + 1)
    tc = np.minimum(t, T)
    lon = quartic_coeffs(state.s, v0, state.s_dd, 0.0, 0.0, T)
    s = _poly_eval(lon, tc)
    s_d = np.where(t < T, _poly_eval(lon, tc, 1), 0.0)
    s_dd = np.where(t < T, _poly_eval(lon, tc, 2), 0.0)
    T_lat = max(cfg.maneuver_time, cfg.horizon * cfg.dt)
    lat = quintic_coeffs(state.d, state.d_d, state.d_dd, state.d, 0.0, 0.0, T_lat)
    d = _poly_eval(lat, t)
    states = [FrenetState(*vals) for vals in zip(
        s, s_d, s_dd, d, _poly_eval(lat, t, 1), _poly_eval(lat, t, 2))]
    xy = path.to_cartesian(s, d)
    jerk = cfg.w_jerk * (_jerk_integral(lat, T_lat) + _jerk_integral(lon, T))
    deviation = cfg.w_offset * abs(state.d) + cfg.w_speed * nominal_speed
    hit = _collision_cost(xy, obstacles, weights, cfg.collision_radius)
    return FrenetCandidate(state.d, 0.0, Trajectory(xy, cfg.dt), states,
                           (jerk, deviation, cfg.w_collision * hit), emergency=True, colliding=hit > 0)


def frenet_plan(path: ReferencePath, state: FrenetState, predictions, nominal_speed: float,
                config: PlannerConfig = PlannerConfig()) -> PlanResult:
    """Pick the cheapest candidate against all predicted modes.

    Ties are broken by smaller absolute offset, then smaller speed deviation.
    If every grid candidate overlaps some predicted mode, the emergency
    braking candidate is returned instead.
    """
    obstacles, weights = _obstacle_array(predictions, config.horizon)
    candidates = [
        _build(path, state, d_t, f * nominal_speed, config, nominal_speed, obstacles, weights)
        for d_t in config.lateral_grid
        for f in config.speed_factors
    ]
    emergency = _emergency(path, state, config, nominal_speed, obstacles, weights)
    free = [c for c in candidates if not c.colliding]
    if not free:
        return PlanResult(emergency, candidates + [emergency])

    def key(c: FrenetCandidate):
        return (c.total_cost, abs(c.lateral_target), abs(c.target_speed - nominal_speed))

    pool = candidates + [emergency]
    best = min(pool, key=key)
    return PlanResult(best, pool)
