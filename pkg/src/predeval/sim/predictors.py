"""Parametric predictors spanning the accuracy/diversity plane.

All predictors emit six modes over fifteen steps. Only ``oracle_blend``
looks at the ground truth; it exists to dial accuracy in directly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from ..core import DEFAULT_DT, PredictionSet
from .rng import rng_for

N_MODES = 6
HORIZON = 15

MANEUVERS = ("keep", "brake", "accelerate", "left", "right", "hard_left")
MANEUVER_PRIOR = np.array([0.4, 0.15, 0.15, 0.12, 0.12, 0.06])

_BRAKE = 4.0  # m/s^2
_ACCEL = 2.5  # m/s^2
_LATERAL = 3.5  # m, lane-change primitive
_HARD_YAW = 0.6  # rad/s


@dataclass(frozen=True)
class PredictorKind:
    """``name`` is constant_velocity, noisy_cv, multimodal_maneuver or oracle_blend."""

    name: str
    sigma: float = 0.0
    n_modes: int = N_MODES
    alpha: float = 0.0

    def __post_init__(self):
        if self.name not in ("constant_velocity", "noisy_cv", "multimodal_maneuver", "oracle_blend"):
            raise ValueError(f"unknown predictor {self.name!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 2 <= self.n_modes <= 6 and self.name == "multimodal_maneuver":
            raise ValueError("n_modes must be in [2, 6]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")

    @property
    def id(self) -> str:
        if self.name == "noisy_cv":
            return f"noisy_cv({self.sigma:g})"
        if self.name == "multimodal_maneuver":
            return f"multimodal_maneuver({self.n_modes})"
        if self.name == "oracle_blend":
            return f"oracle_blend({self.alpha:g})"
        return "constant_velocity"

    @property
    def needs_truth(self) -> bool:
        return self.name == "oracle_blend"


_SPEC = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*$")


def parse_predictor(text: str) -> PredictorKind:
    """Parse ``"noisy_cv(1.5)"``-style identifiers."""
    m = _SPEC.match(text)
    if not m:
        raise ValueError(f"cannot parse predictor {text!r}")
    name, arg = m.group(1), m.group(2)
    aliases = {"cv": "constant_velocity", "multimodal": "multimodal_maneuver", "oracle": "oracle_blend"}
    name = aliases.get(name, name)
    if name == "constant_velocity":
        return PredictorKind(name)
    if arg is None:
        raise ValueError(f"predictor {name!r} needs a parameter, e.g. {name}(1.0)")
    if name == "noisy_cv":
        return PredictorKind(name, sigma=float(arg))
    if name == "multimodal_maneuver":
        return PredictorKind(name, n_modes=int(float(arg)))
    if name == "oracle_blend":
        return PredictorKind(name, alpha=float(arg))
    raise ValueError(f"unknown predictor {name!r}")


def _cv(position: np.ndarray, velocity: np.ndarray, horizon: int, dt: float) -> np.ndarray:
    steps = dt * np.arange(1, horizon + 1)
    return position[None, :] + steps[:, None] * velocity[None, :]


def _maneuver_mode(name: str, position, velocity, horizon: int, dt: float) -> np.ndarray:
    speed = float(np.linalg.norm(velocity))
    heading = np.arctan2(velocity[1], velocity[0]) if speed > 1e-6 else 0.0
    fwd = np.array([np.cos(heading), np.sin(heading)])
    left = np.array([-fwd[1], fwd[0]])
    t = dt * np.arange(1, horizon + 1)
    tau = t / t[-1]
    if name == "keep":
        return _cv(position, velocity, horizon, dt)
    if name == "brake":
        t_stop = speed / _BRAKE
        tc = np.minimum(t, t_stop)
        s = speed * tc - 0.5 * _BRAKE * tc**2
        return position + np.outer(s, fwd)
    if name == "accelerate":
        s = speed * t + 0.5 * _ACCEL * t**2
        return position + np.outer(s, fwd)
    if name in ("left", "right"):
        sign = 1.0 if name == "left" else -1.0
        lateral = sign * _LATERAL * (10 * tau**3 - 15 * tau**4 + 6 * tau**5)
        return position + np.outer(speed * t, fwd) + np.outer(lateral, left)
    if name == "hard_left":
        psi = heading + _HARD_YAW * t
        if _HARD_YAW * speed < 1e-9:
            return _cv(position, velocity, horizon, dt)
        r = speed / _HARD_YAW
        x = position[0] + r * (np.sin(psi) - np.sin(heading))
        y = position[1] - r * (np.cos(psi) - np.cos(heading))
        return np.stack([x, y], axis=1)
    raise ValueError(f"unknown maneuver primitive {name!r}")


def _velocity_from_history(history: np.ndarray, dt: float) -> np.ndarray:
    return (history[-1] - history[-2]) / dt


def predict(
    kind: PredictorKind,
    history,
    agent_id: str = "agent",
    dt: float = DEFAULT_DT,
    horizon: int = HORIZON,
    truth=None,
    key=(),
) -> PredictionSet:
    """Six-mode forecast from a planar position history (oldest first).

    ``truth`` (horizon x 2) is required for ``oracle_blend``. ``key`` seeds
    the noise of ``noisy_cv`` so that repeated calls are reproducible.
    """
    hist = np.asarray(history, dtype=float)
    if hist.ndim != 2 or hist.shape[0] < 2:
        raise ValueError("history needs at least 2 positions to estimate velocity")
    hist = hist[:, :2]
    pos = hist[-1]
    vel = _velocity_from_history(hist, dt)
    cv = _cv(pos, vel, horizon, dt)

    if kind.name == "constant_velocity":
        return PredictionSet(agent_id, np.repeat(cv[None], N_MODES, axis=0), None, dt)
    if kind.name == "noisy_cv":
        rng = rng_for("noisy_cv", kind.sigma, agent_id, *key)
        eps = rng.standard_normal((N_MODES, 2)) * kind.sigma
        ramp = np.arange(1, horizon + 1) / horizon
        modes = cv[None] + eps[:, None, :] * ramp[None, :, None]
        return PredictionSet(agent_id, modes, None, dt)
    if kind.name == "multimodal_maneuver":
        names = MANEUVERS[: kind.n_modes]
        modes = np.stack([_maneuver_mode(n, pos, vel, horizon, dt) for n in names])
        probs = MANEUVER_PRIOR[: kind.n_modes] / MANEUVER_PRIOR[: kind.n_modes].sum()
        # the padding keeps the M=6 contract: extra modes repeat "keep" at zero weight
        if kind.n_modes < N_MODES:
            pad = N_MODES - kind.n_modes
            modes = np.concatenate([modes, np.repeat(modes[:1], pad, axis=0)])
            probs = np.concatenate([probs, np.zeros(pad)])
        return PredictionSet(agent_id, modes, probs, dt)
    # oracle_blend
    if truth is None:
        raise ValueError("oracle_blend needs the ground-truth future")
    gt = np.asarray(truth, dtype=float)[:horizon]
    blend = kind.alpha * gt + (1.0 - kind.alpha) * cv
    return PredictionSet(agent_id, np.repeat(blend[None], N_MODES, axis=0), None, dt)
