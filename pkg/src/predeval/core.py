"""Domain types shared across the toolkit.

Agent states carry 3D kinematics (the classifier uses z); trajectories and
predictions are planar, since every metric is defined on 2D positions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

DEFAULT_DT = 0.1
CLASSIFIER_WINDOW = 15
EGO_ID = "ego"


class ScenarioKind(str, enum.Enum):
    HIGHWAY = "highway"
    INTERSECTION = "intersection"
    MERGE = "merge"
    REPLAYED = "replayed"


def _frozen_array(values, shape_tail: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape_tail is not None and arr.shape[-len(shape_tail):] != shape_tail:
        raise ValueError(f"expected trailing shape {shape_tail}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AgentState:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    agent_id: str
    timestep: int

    def __post_init__(self):
        for name in ("position", "velocity", "acceleration"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), (3,)))
        if not all(np.isfinite(getattr(self, n)).all() for n in ("position", "velocity", "acceleration")):
            raise ValueError(f"non-finite state for agent {self.agent_id!r}")
        if self.timestep < 0:
            raise ValueError("timestep must be >= 0")

    def __eq__(self, other):
        if not isinstance(other, AgentState):
            return NotImplemented
        return (
            self.agent_id == other.agent_id
            and self.timestep == other.timestep
            and np.array_equal(self.position, other.position)
            and np.array_equal(self.velocity, other.velocity)
            and np.array_equal(self.acceleration, other.acceleration)
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Planar trajectory sampled every ``dt`` seconds, shape (T, 2)."""

    points: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        pts = _frozen_array(self.points)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ValueError(f"trajectory points must have shape (T>=1, 2), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("trajectory contains non-finite points")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self.points, other.points)


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """M alternative futures for one agent.

    ``modes`` has shape (M, T_p, 2). ``mode_probs`` is optional; when set it
    must sum to one.
    """

    agent_id: str
    modes: np.ndarray
    mode_probs: np.ndarray | None = None
    dt: float = DEFAULT_DT

    def __post_init__(self):
        modes = _frozen_array(self.modes)
        if modes.ndim != 3 or modes.shape[2] != 2 or modes.shape[0] < 1 or modes.shape[1] < 1:
            raise ValueError(f"modes must have shape (M, T_p, 2), got {modes.shape}")
        object.__setattr__(self, "modes", modes)
        if self.mode_probs is not None:
            object.__setattr__(self, "mode_probs", _frozen_array(self.mode_probs))
            if self.mode_probs.shape != (modes.shape[0],):
                raise ValueError("mode_probs length must equal the number of modes")

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def horizon(self) -> int:
        return self.modes.shape[1]

    def weights(self) -> np.ndarray:
        """Mode weights, uniform when no probabilities were given."""
        if self.mode_probs is None:
            return np.full(self.n_modes, 1.0 / self.n_modes)
        return np.asarray(self.mode_probs)

    def best_mode(self) -> int:
        if self.mode_probs is None:
            return 0
        return int(np.argmax(self.mode_probs))

    def problems(self) -> list[str]:
        out = []
        if not np.isfinite(self.modes).all():
            out.append(f"predictions[{self.agent_id}].modes: non-finite point")
        if self.mode_probs is not None:
            p = np.asarray(self.mode_probs)
            if (p < 0).any():
                out.append(f"predictions[{self.agent_id}].mode_probs: negative weight")
            if abs(p.sum() - 1.0) > 1e-9:
                out.append(
                    f"predictions[{self.agent_id}].mode_probs: PredictionSet normalization "
                    f"violated (sum={p.sum():.6g})"
                )
        return out

    def __eq__(self, other):
        if not isinstance(other, PredictionSet):
            return NotImplemented
        if (self.mode_probs is None) != (other.mode_probs is None):
            return False
        return (
            self.agent_id == other.agent_id
            and self.dt == other.dt
            and np.array_equal(self.modes, other.modes)
            and (self.mode_probs is None or np.array_equal(self.mode_probs, other.mode_probs))
        )


@dataclass(frozen=True, eq=False)
class ScenarioLog:
    scenario_id: str
    kind: ScenarioKind
    seed: int
    agents: dict[str, tuple[AgentState, ...]]
    futures: dict[str, Trajectory]
    reference_path: np.ndarray
    dt: float = DEFAULT_DT
    nominal_speed: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "agents", {k: tuple(v) for k, v in self.agents.items()})
        object.__setattr__(self, "futures", dict(self.futures))
        object.__setattr__(self, "reference_path", _frozen_array(self.reference_path))

    @property
    def history_length(self) -> int:
        return len(self.agents[EGO_ID]) if EGO_ID in self.agents else 0

    @property
    def agent_ids(self) -> list[str]:
        """Ego first, then the others in sorted order."""
        others = sorted(a for a in self.agents if a != EGO_ID)
        return ([EGO_ID] if EGO_ID in self.agents else []) + others

    def positions(self, agent_id: str) -> np.ndarray:
        """History positions (T_h, 3)."""
        return np.stack([s.position for s in self.agents[agent_id]])

    def velocities(self, agent_id: str) -> np.ndarray:
        return np.stack([s.velocity for s in self.agents[agent_id]])

    def ego_speed(self) -> float:
        if self.nominal_speed is not None:
            return float(self.nominal_speed)
        return float(np.linalg.norm(self.agents[EGO_ID][-1].velocity[:2]))

    def __eq__(self, other):
        if not isinstance(other, ScenarioLog):
            return NotImplemented
        return (
            self.scenario_id == other.scenario_id
            and self.kind == other.kind
            and self.seed == other.seed
            and self.dt == other.dt
            and self.nominal_speed == other.nominal_speed
            and self.agents == other.agents
            and self.futures == other.futures
            and np.array_equal(self.reference_path, other.reference_path)
        )


@dataclass(frozen=True)
class PerformanceRecord:
    efficiency: float
    discomfort: float
    unsafety: float
    overall: float

    def problems(self) -> list[str]:
        out = []
        if not 0.0 <= self.efficiency <= 1.0:
            out.append("performance.efficiency: outside [0, 1]")
        if not self.discomfort >= 0.0:
            out.append("performance.discomfort: negative")
        if not self.unsafety >= 0.0:
            out.append("performance.unsafety: negative")
        if not np.isfinite(self.overall):
            out.append("performance.overall: not finite")
        return out


@dataclass(frozen=True)
class EvaluationRecord:
    scenario_id: str
    predictor_id: str
    p_critical: float
    gad: float
    e_error: float
    gad_norm: float
    e_error_norm: float
    score: float
    performance: PerformanceRecord | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)


def validate_scenario(log: ScenarioLog, predictions: dict[str, PredictionSet] | None = None) -> list[str]:
    """Check every invariant of a scenario log (and optional predictions).

    Returns a list of human-readable violations, each naming the field and
    the broken rule. An empty list means the log is well formed.
    """
    problems: list[str] = []
    if EGO_ID not in log.agents:
        problems.append(f"agents: ego agent {EGO_ID!r} missing")
    lengths = {aid: len(hist) for aid, hist in log.agents.items()}
    if len(set(lengths.values())) > 1:
        problems.append(f"agents: histories have unequal lengths {sorted(set(lengths.values()))}")
    if lengths and min(lengths.values()) < CLASSIFIER_WINDOW:
        problems.append(
            f"agents: history shorter than classifier window ({min(lengths.values())} < {CLASSIFIER_WINDOW})"
        )
    for aid, hist in log.agents.items():
        for i, state in enumerate(hist):
            if state.agent_id != aid:
                problems.append(f"agents[{aid}][{i}].agent_id: mismatched id {state.agent_id!r}")
                break
    horizons = {len(tr) for tr in log.futures.values()}
    if len(horizons) > 1:
        problems.append(f"futures: unequal horizons {sorted(horizons)}")
    for aid in log.futures:
        if aid not in log.agents:
            problems.append(f"futures[{aid}]: no matching agent history")
    for aid, tr in log.futures.items():
        if tr.dt != log.dt:
            problems.append(f"futures[{aid}].dt: {tr.dt} differs from log dt {log.dt}")
    ref = np.asarray(log.reference_path)
    if ref.ndim != 2 or ref.shape[1] != 2 or ref.shape[0] < 2:
        problems.append("reference_path: must be a polyline of >= 2 planar points")
    elif not np.isfinite(ref).all():
        problems.append("reference_path: non-finite vertex")
    if predictions:
        pred_horizons = {p.horizon for p in predictions.values()}
        if len(pred_horizons) > 1:
            problems.append(f"predictions: unequal horizons {sorted(pred_horizons)}")
        for p in predictions.values():
            problems.extend(p.problems())
    return problems


def jerk_profile(traj: Trajectory) -> np.ndarray:
    """Jerk magnitude (m/s^3) from third differences of positions.

    Returns ``len(traj) - 3`` values.
    """
    pts = np.asarray(traj.points)
    if pts.shape[0] < 4:
        raise ValueError("insufficient points for jerk")
    third = np.diff(pts, n=3, axis=0) / traj.dt**3
    return np.linalg.norm(third, axis=1)
