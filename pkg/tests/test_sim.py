from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predeval.core import EGO_ID, PredictionSet, Trajectory, validate_scenario
from predeval.metrics import displacement_error
from predeval.scenarionn.graph import label_criticality
from predeval.sim.closed_loop import initial_state, run_closed_loop, run_episode
from predeval.sim.performance import driving_performance
from predeval.sim.planner import (
    FrenetState, PlannerConfig, ReferencePath, frenet_plan, quartic_coeffs, quintic_coeffs,
)
from predeval.sim.predictors import parse_predictor, predict
from predeval.sim.rng import rng_for
from predeval.sim.scenarios import generate_scenario, generate_suite

from conftest import make_log

STRAIGHT = ReferencePath([[0.0, 0.0], [1000.0, 0.0]])


# scenarios -------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["highway", "intersection", "merge"])
def test_generator_deterministic_and_valid(kind):
    a = generate_scenario(kind, 123, 5)
    b = generate_scenario(kind, 123, 5)
    assert a == b
    assert validate_scenario(a) == []
    assert a != generate_scenario(kind, 124, 5)


def test_generator_rejects_bad_arguments():
    with pytest.raises(ValueError, match="unsupported scenario kind"):
        generate_scenario("roundabout", 0)
    with pytest.raises(ValueError):
        generate_scenario("highway", 0, n_agents=9)


def test_highway_mostly_free_of_conflicts():
    calm = [label_criticality(generate_scenario("highway", s, 3 + s % 6)) == 0 for s in range(1000)]
    assert np.mean(calm) >= 0.9


def test_intersection_label_rate_in_band():
    rate = np.mean([label_criticality(generate_scenario("intersection", s, 3 + s % 6)) for s in range(1000)])
    assert 0.3 <= rate <= 0.7


def test_suite_streams_are_independent():
    a = generate_suite({"highway": 3}, 7)
    b = generate_suite({"highway": 3}, 7, stream="train")
    assert [lg.scenario_id for lg in a] == ["highway-00000", "highway-00001", "highway-00002"]
    assert all(x.seed != y.seed for x, y in zip(a, b))
    assert generate_suite({"highway": 3}, 7) == a


def test_rng_for_is_order_free():
    x = rng_for("a", 1, "b").integers(1 << 30, size=4)
    rng_for("other").integers(10)
    np.testing.assert_array_equal(x, rng_for("a", 1, "b").integers(1 << 30, size=4))
    assert not np.array_equal(x, rng_for("a", 2, "b").integers(1 << 30, size=4))


# predictors ------------------------------------------------------------------

def test_cv_extrapolation():
    hist = np.array([[-0.1, 0.0], [0.0, 0.0]])
    p = predict(parse_predictor("constant_velocity"), hist)
    assert p.modes.shape == (6, 15, 2)
    np.testing.assert_allclose(p.modes[0, -1], [1.5, 0.0], atol=1e-12)


def test_oracle_blend_one_is_truth():
    truth = np.cumsum(np.ones((15, 2)), axis=0)
    p = predict(parse_predictor("oracle_blend(1)"), np.zeros((3, 2)), truth=truth)
    for v in ("ADE", "FDE", "minADE", "minFDE", "aveADE", "aveFDE"):
        assert displacement_error(p, Trajectory(truth), v) == 0.0


def test_noisy_cv_zero_sigma_is_cv():
    hist = np.array([[0.0, 0.0], [1.0, 0.5]])
    a = predict(parse_predictor("noisy_cv(0)"), hist)
    b = predict(parse_predictor("cv"), hist)
    np.testing.assert_array_equal(a.modes, b.modes)


def test_noisy_cv_reproducible_per_key():
    hist = np.array([[0.0, 0.0], [1.0, 0.5]])
    k = parse_predictor("noisy_cv(2)")
    a = predict(k, hist, "a1", key=(1, "s"))
    assert a.modes.tobytes() == predict(k, hist, "a1", key=(1, "s")).modes.tobytes()
    assert not np.array_equal(a.modes, predict(k, hist, "a1", key=(2, "s")).modes)


def test_multimodal_probabilities():
    p = predict(parse_predictor("multimodal_maneuver(6)"), np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert p.weights().sum() == pytest.approx(1.0)
    assert p.best_mode() == 0
    np.testing.assert_allclose(p.modes[0], predict(parse_predictor("cv"), [[0, 0], [1, 0]]).modes[0])


@pytest.mark.parametrize("bad", ["lstm(1)", "noisy_cv", "noisy_cv(-1)", "multimodal_maneuver(9)", "x y"])
def test_parse_predictor_rejects(bad):
    with pytest.raises(ValueError):
        parse_predictor(bad)


# planner ---------------------------------------------------------------------

def cruise(v=10.0):
    return FrenetState(0.0, v, 0.0, 0.0, 0.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-3, 3), st.floats(-2, 2), st.floats(-5, 5), st.floats(0.5, 5))
def test_quintic_boundary_conditions(x0, v0, a0, x1, T):
    c = quintic_coeffs(x0, v0, a0, x1, 0.0, 0.0, T)
    poly = np.polynomial.Polynomial(c)
    assert poly(0) == pytest.approx(x0) and poly.deriv()(0) == pytest.approx(v0)
    assert poly(T) == pytest.approx(x1, abs=1e-8)
    assert poly.deriv()(T) == pytest.approx(0, abs=1e-8)
    assert poly.deriv(2)(T) == pytest.approx(0, abs=1e-8)
    q = np.polynomial.Polynomial(quartic_coeffs(x0, v0, a0, x1, 0.0, T))
    assert q.deriv()(T) == pytest.approx(x1, abs=1e-8)


def test_empty_road_keeps_lane_and_speed():
    res = frenet_plan(STRAIGHT, cruise(), [], 10.0)
    assert res.chosen.lateral_target == 0.0
    assert res.chosen.target_speed == 10.0
    assert not res.emergency


def test_stopped_obstacle_ahead_is_avoided():
    obstacle = PredictionSet("a1", np.tile([[12.0, 0.0]], (6, 15, 1)))
    res = frenet_plan(STRAIGHT, cruise(), [obstacle], 10.0)
    c = res.chosen
    assert c.lateral_target != 0.0 or c.target_speed < 10.0
    assert not c.colliding
    gaps = np.linalg.norm(c.trajectory.points - np.array([12.0, 0.0]), axis=1)
    assert gaps.min() >= PlannerConfig().collision_radius


def test_blocked_grid_falls_back_to_braking():
    # a wall of predicted obstacles across every lateral target
    pts = np.array([[x, y] for x in np.arange(1.0, 25.0, 1.0) for y in np.arange(-4.0, 4.5, 1.0)])
    walls = [PredictionSet(f"w{i}", np.tile(p, (1, 15, 1))) for i, p in enumerate(pts)]
    res = frenet_plan(STRAIGHT, cruise(), walls, 10.0)
    assert res.emergency
    speeds = [s.s_d for s in res.chosen.states]
    # from 10 m/s the jerk-limited stop needs 1.875 s, longer than the 1.5 s window
    assert all(b <= a + 1e-9 for a, b in zip(speeds, speeds[1:])) and speeds[-1] < 2.0
    accel = [s.s_dd for s in res.chosen.states]
    assert min(accel) >= -PlannerConfig().max_brake - 1e-9
    # from 4 m/s the stop completes (0.75 s) and the car stays put
    slow = frenet_plan(STRAIGHT, cruise(4.0), walls, 4.0).chosen
    assert [s.s_d for s in slow.states][-8:] == [0.0] * 8


def _clearance(xy, preds):
    return min(np.linalg.norm(p.modes[:, :15] - xy[None], axis=2).min() for p in preds)


def test_diverse_predictions_keep_more_clearance_than_a_wrong_mode():
    kind = parse_predictor("multimodal_maneuver(6)")
    for seed in range(20):
        lg = generate_scenario("intersection", seed, 3)
        path = ReferencePath(lg.reference_path)
        state = initial_state(lg, path)
        preds = [predict(kind, lg.positions(a)[:, :2], a) for a in lg.agent_ids if a != EGO_ID]
        wrong = [PredictionSet(p.agent_id, p.modes[[5]]) for p in preds]
        diverse = frenet_plan(path, state, preds, lg.ego_speed()).chosen
        single = frenet_plan(path, state, wrong, lg.ego_speed()).chosen
        assert _clearance(diverse.trajectory.points, preds) >= _clearance(single.trajectory.points, preds)


def test_reference_path_round_trip():
    path = ReferencePath([[0, 0], [10, 0], [10, 10]])
    for s, d in [(3.0, 0.5), (14.0, -1.0)]:
        xy = path.to_cartesian(s, d)
        s2, d2, _ = path.to_frenet(xy)
        assert (s2, d2) == pytest.approx((s, d))


# performance -----------------------------------------------------------------

def test_ideal_drive_scores_one():
    log = make_log({EGO_ID: ((0, 0), (10, 0)), "a1": ((0, 50), (10, 0))})
    rec = driving_performance(log.futures[EGO_ID], log)
    assert (rec.efficiency, rec.unsafety, rec.overall) == pytest.approx((1.0, 0.0, 1.0))
    assert rec.discomfort == pytest.approx(0.0, abs=1e-6)


def test_collision_is_fully_unsafe():
    log = make_log({EGO_ID: ((0, 0), (10, 0)), "a1": ((0, 0.5), (10, 0))})
    assert driving_performance(log.futures[EGO_ID], log).unsafety == 1.0


def test_cubic_profile_discomfort():
    log = make_log({EGO_ID: ((0, 0), (1, 0))}, dt=1.0)
    t = np.arange(1, 16, dtype=float)
    rec = driving_performance(Trajectory(np.c_[t**3, np.zeros_like(t)], 1.0), log, start=(0.0, 0.0))
    assert rec.discomfort == pytest.approx(6.0, abs=1e-9)
    # discomfort normalized by the 5 m/s^3 cap saturates at 1
    assert rec.overall == pytest.approx(rec.efficiency - 0.5 * 1.0 - 2.0 * rec.unsafety)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_performance_invariants(seed):
    rng = np.random.default_rng(seed)
    lg = generate_scenario("merge", seed, int(rng.integers(2, 9)))
    ego = Trajectory(lg.futures[EGO_ID].points + rng.normal(scale=0.5, size=(15, 2)))
    assert driving_performance(ego, lg).problems() == []


# closed loop -----------------------------------------------------------------

def test_zero_scenarios():
    assert run_closed_loop([], [parse_predictor("cv")]) == ([], [])


def test_oracle_not_worse_than_noise_on_highway():
    logs = generate_suite({"highway": 12}, 3)
    good, _ = run_closed_loop(logs, [parse_predictor("oracle_blend(1)")])
    bad, _ = run_closed_loop(logs, [parse_predictor("noisy_cv(2)")])
    assert np.mean([r.performance.overall for r in good]) >= np.mean([r.performance.overall for r in bad])


def test_episode_is_deterministic():
    lg = generate_scenario("intersection", 5, 4)
    k = parse_predictor("noisy_cv(2)")
    a, b = run_episode(lg, k), run_episode(lg, k)
    assert a.ego == b.ego and a.performance == b.performance
    assert a.metrics.gad == b.metrics.gad
    assert len(a.ego) == 15


def test_failures_are_recorded_not_dropped():
    lg = generate_scenario("highway", 1, 3)
    broken = type(lg)(lg.scenario_id, lg.kind, lg.seed, lg.agents, {}, lg.reference_path, lg.dt, lg.nominal_speed)
    results, failures = run_closed_loop([broken, lg], [parse_predictor("cv")])
    assert len(results) == 1 and failures[0][:2] == (lg.scenario_id, "constant_velocity")
