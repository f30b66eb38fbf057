"""Seeded synthetic driving scenarios.

Every scenario places the ego at the origin at the last history frame,
driving along +x on a straight reference path. Other agents follow
kinematic programs: a straight history (optionally accelerating) and a
future maneuver that starts at the first future frame. Highways are
dense but calm; intersections and merges put one agent on a possible
conflict course whose maneuver is only hinted at by its history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DEFAULT_DT, EGO_ID, AgentState, ScenarioKind, ScenarioLog, Trajectory
from .rng import rng_for

HISTORY_STEPS = 15
FUTURE_STEPS = 15
LANE_WIDTH = 3.5
_SUBSTEPS = 20


@dataclass(frozen=True)
class Maneuver:
    """Future control program in the agent's own frame.

    ``kind`` is one of keep, brake, accelerate, turn, lane_change. ``value``
    is the deceleration/acceleration (m/s^2), yaw rate (rad/s, signed) or
    lateral shift (m, signed) depending on the kind; ``duration`` applies
    to turns and lane changes.
    """

    kind: str = "keep"
    value: float = 0.0
    duration: float = 0.0


@dataclass(frozen=True)
class AgentProgram:
    position: tuple[float, float]  # at the last history frame
    heading: float
    speed: float
    history_accel: float = 0.0
    maneuver: Maneuver = Maneuver()
    v_max: float = 35.0


def _controls(m: Maneuver, t: float, v: float, v_max: float) -> tuple[float, float]:
    if m.kind == "keep":
        return 0.0, 0.0
    if m.kind == "brake":
        return (-m.value if v > 0 else 0.0), 0.0
    if m.kind == "accelerate":
        return (m.value if v < v_max else 0.0), 0.0
    if m.kind == "turn":
        return 0.0, (m.value if t < m.duration else 0.0)
    if m.kind == "lane_change":
        if t >= m.duration or v <= 0.1:
            return 0.0, 0.0
        # sinusoidal yaw rate whose integral over the maneuver shifts the
        # agent laterally by roughly ``value`` metres
        peak = 2.0 * np.pi * m.value / (v * m.duration**2)
        return 0.0, peak * np.sin(2.0 * np.pi * t / m.duration)
    raise ValueError(f"unknown maneuver {m.kind!r}")


def rollout(program: AgentProgram, t_hist: int, t_fut: int, dt: float) -> np.ndarray:
    """Planar positions at frames ``-t_hist .. t_fut + 1`` (one pad frame each side)."""
    u = np.array([np.cos(program.heading), np.sin(program.heading)])
    p0 = np.array(program.position, dtype=float)
    past_t = -dt * np.arange(t_hist, 0, -1)
    # keep the history speed nonnegative
    a_h = program.history_accel
    if program.speed + a_h * past_t[0] < 0:
        a_h = program.speed / (-past_t[0])
    past = p0 + np.outer(program.speed * past_t + 0.5 * a_h * past_t**2, u)

    x, y = p0
    psi, v = program.heading, program.speed
    h = dt / _SUBSTEPS
    fut = [p0.copy()]
    t = 0.0
    for _ in range(t_fut + 1):
        for _ in range(_SUBSTEPS):
            a, w = _controls(program.maneuver, t, v, program.v_max)
            v = min(max(v + a * h, 0.0), max(program.v_max, program.speed))
            psi += w * h
            x += v * np.cos(psi) * h
            y += v * np.sin(psi) * h
            t += h
        fut.append(np.array([x, y]))
    return np.vstack([past, np.array(fut)])


def _states(agent_id: str, padded: np.ndarray, t_hist: int, dt: float) -> tuple[list[AgentState], np.ndarray]:
    vel = (padded[2:] - padded[:-2]) / (2 * dt)
    acc = (padded[2:] - 2 * padded[1:-1] + padded[:-2]) / dt**2
    core = padded[1:-1]
    states = []
    for k in range(t_hist):
        states.append(AgentState(
            position=np.array([core[k, 0], core[k, 1], 0.0]),
            velocity=np.array([vel[k, 0], vel[k, 1], 0.0]),
            acceleration=np.array([acc[k, 0], acc[k, 1], 0.0]),
            agent_id=agent_id,
            timestep=k,
        ))
    return states, core[t_hist:]


def _pick(rng, options: dict) -> str:
    names = list(options)
    p = np.array([options[n] for n in names], dtype=float)
    return names[rng.choice(len(names), p=p / p.sum())]


def _random_maneuver(rng, probs: dict, speed: float) -> Maneuver:
    kind = _pick(rng, probs)
    if kind == "brake":
        return Maneuver("brake", rng.uniform(2.5, 5.0))
    if kind == "accelerate":
        return Maneuver("accelerate", rng.uniform(1.5, 3.0))
    if kind == "turn":
        return Maneuver("turn", rng.choice([-1.0, 1.0]) * rng.uniform(0.4, 0.8), 1e9)
    if kind == "lane_change":
        return Maneuver("lane_change", rng.choice([-1.0, 1.0]) * LANE_WIDTH, rng.uniform(2.0, 3.0))
    if kind == "mild":
        return Maneuver("accelerate" if rng.random() < 0.5 else "brake", rng.uniform(0.3, 1.2))
    return Maneuver()


def _free_slot(rng, taken: list, lane: float, lo: float, hi: float, gap: float) -> float | None:
    for _ in range(50):
        x = rng.uniform(lo, hi)
        if all(abs(x - tx) >= gap for tl, tx in taken if tl == lane):
            return x
    return None


def _background(rng, taken: list, v_ref: float, probs: dict, gap: float = 20.0) -> AgentProgram | None:
    """A same-direction vehicle away from the ego's immediate surroundings."""
    for _ in range(50):
        lane = float(rng.choice([-LANE_WIDTH, 0.0, LANE_WIDTH]))
        x = _free_slot(rng, taken, lane, -70.0, 110.0, gap)
        if x is None:
            continue
        near = (-30.0 < x < 45.0) if lane == 0.0 else (-20.0 < x < 35.0)
        if not near:
            break
    else:
        return None
    taken.append((lane, x))
    speed = max(0.0, v_ref + rng.uniform(-1.5, 1.5))
    return AgentProgram((x, lane), 0.0, speed, rng.uniform(-0.3, 0.3),
                        _random_maneuver(rng, probs, speed))


def _fill_background(rng, programs: list, taken: list, n_agents: int, v_ref: float) -> None:
    calm = {"keep": 0.8, "mild": 0.2}
    tries = 0
    while len(programs) < n_agents - 1 and tries < 100:
        tries += 1
        prog = _background(rng, taken, v_ref, calm)
        if prog is not None:
            programs.append(prog)


def _highway(rng, n_agents):
    """Dense same-direction traffic: a lead car plus neighbours in both adjacent lanes."""
    v_e = rng.uniform(20.0, 26.0)
    calm = {"keep": 0.75, "mild": 0.25}
    lead = AgentProgram((rng.uniform(20.0, 35.0), 0.0), 0.0, v_e + rng.uniform(-1.0, 1.0),
                        rng.uniform(-0.3, 0.3), _random_maneuver(rng, calm, v_e))
    programs = [lead]
    taken = [(0.0, 0.0), (0.0, lead.position[0])]
    tries = 0
    while len(programs) < n_agents - 1 and tries < 100:
        tries += 1
        lane = float(rng.choice([-LANE_WIDTH, LANE_WIDTH]))
        x = _free_slot(rng, taken, lane, -15.0, 30.0, 10.0)
        if x is None:
            continue
        taken.append((lane, x))
        programs.append(AgentProgram((x, lane), 0.0, v_e + rng.uniform(-1.0, 1.0), rng.uniform(-0.3, 0.3),
                                     _random_maneuver(rng, calm, v_e)))
    _fill_background(rng, programs, taken, n_agents, v_e)
    return v_e, programs


def _intersection(rng, n_agents):
    """A crossing agent that either goes through the conflict point or yields.

    Intent leaks into the history the way it does on real roads: agents
    about to go are already speeding up, yielding ones already slowing,
    with enough overlap that the history alone is not conclusive.
    """
    v_e = rng.uniform(8.0, 11.0)
    tau_e = rng.uniform(1.1, 1.5)
    x_c = v_e * tau_e
    side = float(rng.choice([-1.0, 1.0]))
    heading = np.pi / 2 if side < 0 else -np.pi / 2
    v_c = rng.uniform(4.0, 6.0)
    go = rng.random() < 0.5
    a_go = rng.uniform(2.5, 4.0)
    tau_c = tau_e + rng.uniform(-0.25, 0.25)
    dist = v_c * tau_c + 0.5 * a_go * tau_c**2
    if go:
        maneuver = Maneuver("accelerate", a_go)
        cue = rng.uniform(-0.3, 1.5)
    else:
        v_c *= rng.uniform(0.45, 0.8)
        maneuver = Maneuver("brake", min(v_c**2 / (2.0 * max(dist - 5.0, 1.5)), 8.0))
        cue = rng.uniform(-2.0, 0.3)
    programs = [AgentProgram((x_c, side * dist), heading, v_c, cue, maneuver, v_max=12.0)]
    _fill_background(rng, programs, [(0.0, 0.0)], n_agents, v_e)
    return v_e, programs


def _merge(rng, n_agents):
    """An adjacent-lane agent just ahead of the ego that may cut in."""
    v_e = rng.uniform(12.0, 16.0)
    side = float(rng.choice([-1.0, 1.0]))
    dx = rng.uniform(3.0, 10.0)
    cut_in = rng.random() < 0.5
    v_m = v_e - rng.uniform(2.0, 5.0) if cut_in else v_e - rng.uniform(0.0, 3.0)
    if cut_in:
        maneuver = Maneuver("lane_change", -side * LANE_WIDTH, rng.uniform(1.5, 2.5))
        drift = rng.uniform(-0.1, 0.6)
    else:
        maneuver = Maneuver() if rng.random() < 0.7 else Maneuver("brake", rng.uniform(1.0, 2.5))
        drift = rng.uniform(-0.3, 0.2)
    heading = float(-side * np.arctan2(drift, v_m))
    programs = [AgentProgram((dx, side * LANE_WIDTH), heading, v_m, rng.uniform(-0.5, 0.5), maneuver)]
    _fill_background(rng, programs, [(0.0, 0.0), (side * LANE_WIDTH, dx)], n_agents, v_e)
    return v_e, programs


_BUILDERS = {
    ScenarioKind.HIGHWAY: _highway,
    ScenarioKind.INTERSECTION: _intersection,
    ScenarioKind.MERGE: _merge,
}


def generate_scenario(
    kind: ScenarioKind | str,
    seed: int,
    n_agents: int = 4,
    dt: float = DEFAULT_DT,
    history_steps: int = HISTORY_STEPS,
    future_steps: int = FUTURE_STEPS,
    scenario_id: str | None = None,
) -> ScenarioLog:
    """Build one replayable scenario; identical arguments give identical logs."""
    try:
        kind = ScenarioKind(kind)
    except ValueError:
        raise ValueError(f"unsupported scenario kind {kind!r}") from None
    if kind not in _BUILDERS:
        raise ValueError(f"unsupported scenario kind {kind.value!r}")
    if not 2 <= n_agents <= 8:
        raise ValueError("n_agents must be in [2, 8]")
    rng = rng_for("scenario", kind.value, seed, n_agents)
    v_e, programs = _BUILDERS[kind](rng, n_agents)
    ego = AgentProgram((0.0, 0.0), 0.0, v_e)

    agents, futures = {}, {}
    ids = [EGO_ID] + [f"a{i}" for i in range(1, len(programs) + 1)]
    for aid, prog in zip(ids, [ego] + programs):
        padded = rollout(prog, history_steps, future_steps, dt)
        states, fut = _states(aid, padded, history_steps, dt)
        agents[aid] = states
        futures[aid] = Trajectory(fut, dt)

    reference = np.array([[-100.0, 0.0], [v_e * (future_steps * dt) * 4 + 200.0, 0.0]])
    return ScenarioLog(
        scenario_id=scenario_id or f"{kind.value}-{seed:06d}",
        kind=kind,
        seed=int(seed),
        agents=agents,
        futures=futures,
        reference_path=reference,
        dt=dt,
        nominal_speed=float(v_e),
    )


def generate_suite(counts: dict, master_seed: int, n_agents: tuple[int, int] = (3, 8), stream: str = "suite",
                   **kwargs) -> list[ScenarioLog]:
    """Scenarios for every kind in ``counts``; agent counts drawn per scenario.

    ``stream`` separates independent suites drawn from the same master
    seed (the classifier's training data must not overlap the test suite).
    """
    logs = []
    for kind, count in counts.items():
        kind = ScenarioKind(kind)
        for i in range(int(count)):
            seed = int(rng_for(stream, master_seed, kind.value, i).integers(2**62))
            k = int(rng_for("agents", seed).integers(n_agents[0], n_agents[1] + 1))
            logs.append(generate_scenario(kind, seed, k, scenario_id=f"{kind.value}-{i:05d}", **kwargs))
    return logs
