from __future__ import annotations

import numpy as np
import pytest

from predeval.core import EGO_ID, AgentState, ScenarioLog, Trajectory


def straight_track(start, velocity, n, dt=0.1, t0=0):
    """Positions start + v*(t0+k)*dt for k in range(n), shape (n, 2)."""
    k = np.arange(t0, t0 + n)[:, None] * dt
    return np.asarray(start, dtype=float)[None] + k * np.asarray(velocity, dtype=float)[None]


def make_log(tracks: dict, history=15, future=15, dt=0.1, scenario_id="s0", kind="highway",
             nominal_speed=None, seed=0) -> ScenarioLog:
    """Scenario log from constant-velocity tracks: {agent_id: (start_xy, velocity_xy)}."""
    agents, futures = {}, {}
    for aid, (start, vel) in tracks.items():
        pts = straight_track(start, vel, history + future, dt)
        v = np.r_[np.asarray(vel, dtype=float), 0.0]
        agents[aid] = [AgentState(np.r_[p, 0.0], v, np.zeros(3), aid, t) for t, p in enumerate(pts[:history])]
        futures[aid] = Trajectory(pts[history:], dt)
    return ScenarioLog(scenario_id, kind, seed, agents, futures,
                       np.array([[-100.0, 0.0], [500.0, 0.0]]), dt, nominal_speed)


@pytest.fixture
def highway_log():
    return make_log({
        EGO_ID: ((0.0, 0.0), (10.0, 0.0)),
        "a1": ((30.0, 0.0), (10.0, 0.0)),
        "a2": ((0.0, 3.5), (10.0, 0.0)),
    })


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 10):
        if n in acceptance_log.RESULTS:
            ok, detail = acceptance_log.RESULTS[n]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
