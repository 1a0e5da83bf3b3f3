import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import forward_camera
from oracles import constant_curvature_arc
from riskfield.config import PlannerParams
from riskfield.planner import (
    ControlSample,
    Trajectory,
    plan,
    psi_goal,
    psi_risk,
    psi_speed,
    rollout,
    rollout_batch,
    sample_controls,
    select_best,
    step,
    total_cost,
    write_scores_csv,
)
from riskfield.projection import project_ground_points, pixel_indices
from riskfield.riskmap import RiskMap
from riskfield.scene import MotorcycleState


def params(**kw):
    return PlannerParams(**kw)


# --- dynamics --------------------------------------------------------------------


def test_straight_line():
    tr = rollout(MotorcycleState(0, 0, 0, 5.0), ControlSample(0, 0), params(horizon_T=2.0))
    f = tr.final
    assert f.x == pytest.approx(10.0, abs=1e-12) and f.y == 0.0 and f.theta == 0.0
    assert len(tr) == 40


def test_straight_line_along_heading():
    tr = rollout(MotorcycleState(1, 2, math.pi / 3, 5.0), ControlSample(0, 0), params())
    f = tr.final
    assert (f.x, f.y) == pytest.approx((1 + 10 * math.cos(math.pi / 3), 2 + 10 * math.sin(math.pi / 3)))
    assert f.theta == pytest.approx(math.pi / 3)


def test_constant_curvature_heading_rate():
    p = params(dt=0.01, horizon_T=1.0, wheelbase_L=1.4)
    tr = rollout(MotorcycleState(0, 0, 0, 5.0, math.atan(0.14)), ControlSample(0, 0), p)
    _, _, theta = constant_curvature_arc(0, 0, 0, 5.0, 0.14 / 1.4, 1.0)
    assert theta == pytest.approx(0.5)
    assert abs(tr.final.theta - theta) < 5e-3


def test_stationary():
    tr = rollout(MotorcycleState(3, 4, 1.0, 0.0, 0.2), ControlSample(0, 0), params())
    assert np.all(tr.positions == [3, 4])


def test_speed_floor_and_steering_clamp():
    p = params(delta_max=0.3)
    tr = rollout(MotorcycleState(0, 0, 0, 1.0), ControlSample(-3.0, 0.5), p)
    assert tr.data[:, 3].min() == 0.0
    assert tr.data[:, 4].max() == 0.3


def test_speed_limit():
    tr = rollout(MotorcycleState(0, 0, 0, 7.5), ControlSample(2.0, 0), params(v_limit=8.0))
    assert tr.data[:, 3].max() == 8.0


def test_lean_angle_is_carried():
    tr = rollout(MotorcycleState(0, 0, 0, 5.0, 0.0, 0.25), ControlSample(1, 0.1), params())
    assert np.all(tr.data[:, 5] == 0.25)


@settings(max_examples=50)
@given(
    st.floats(-3, 2), st.floats(-0.2, 0.2), st.floats(0, 8), st.floats(-0.6, 0.6), st.floats(-math.pi, math.pi)
)
def test_consecutive_states_obey_update_rule(a, dd, v, delta, theta):
    p = params()
    x0 = MotorcycleState(1.0, -2.0, theta, v, delta)
    data = np.vstack([x0.as_array(), rollout(x0, ControlSample(a, dd), p).data])
    for prev, nxt in zip(data, data[1:]):
        x, y, th, sp, de, _ = prev
        assert nxt[0] == pytest.approx(x + sp * math.cos(th) * p.dt, abs=1e-12)
        assert nxt[1] == pytest.approx(y + sp * math.sin(th) * p.dt, abs=1e-12)
        dth = (nxt[2] - (th + sp / p.wheelbase_L * math.tan(de) * p.dt) + math.pi) % (2 * math.pi) - math.pi
        assert abs(dth) <= 1e-12
        assert nxt[3] == pytest.approx(max(sp + a * p.dt, 0.0), abs=1e-12)
        assert nxt[4] == pytest.approx(min(max(de + dd * p.dt, -p.delta_max), p.delta_max), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 2), st.floats(-0.2, 0.2), st.floats(0, 8), st.floats(-0.5, 0.5))
def test_step_composition_equals_rollout(a, dd, v, delta):
    p = params(v_limit=8.0)
    s = MotorcycleState(0.5, 0.5, 0.1, v, delta)
    u = ControlSample(a, dd)
    tr = rollout(s, u, p)
    for k in range(len(tr)):
        s = step(s, u, p.dt, p)
        assert np.array_equal(s.as_array(), tr.data[k])


def test_batch_rollout_matches_single():
    p = params()
    x0 = MotorcycleState(0, 0, 0.2, 4.0, 0.1)
    controls = sample_controls(p)
    batch = rollout_batch(x0, [u.a for u in controls], [u.ddelta for u in controls], p)
    for u, row in zip(controls, batch):
        assert np.array_equal(rollout(x0, u, p).data, row)


def terminal_error(x0, u, dt, T=2.0):
    coarse = rollout(x0, u, params(dt=dt, horizon_T=T)).final
    fine = rollout(x0, u, params(dt=dt / 64, horizon_T=T)).final
    return math.hypot(coarse.x - fine.x, coarse.y - fine.y)


@pytest.mark.parametrize("seed", range(10))
def test_halving_dt_halves_terminal_error(seed):
    rng = np.random.default_rng(seed)
    x0 = MotorcycleState(0, 0, float(rng.uniform(-1, 1)), float(rng.uniform(2, 8)), float(rng.uniform(-0.3, 0.3)))
    u = ControlSample(float(rng.uniform(-1, 2)), float(rng.uniform(-0.2, 0.2)))
    ratio = terminal_error(x0, u, 0.05) / terminal_error(x0, u, 0.025)
    assert 1.5 <= ratio <= 2.5


# --- control sampling -----------------------------------------------------------------


def test_sample_axes():
    us = sample_controls(params(a_min=-2, a_max=2, n_accel=3, n_steer=1))
    assert [u.a for u in us] == [-2.0, 0.0, 2.0]
    assert {u.ddelta for u in us} == {0.0}


def test_degenerate_grid_is_midpoint():
    us = sample_controls(params(a_min=-3, a_max=2, n_accel=1, n_steer=1, ddelta_min=-0.2, ddelta_max=0.1))
    assert us == [ControlSample(-0.5, pytest.approx(-0.05))]


def test_product_cardinality():
    us = sample_controls(params(n_accel=5, n_steer=7))
    assert len(us) == 35
    assert us[0] == ControlSample(-3.0, -0.2) and us[-1] == ControlSample(2.0, 0.2)


# --- cost terms -------------------------------------------------------------------------


def traj_ending_at(x, y, v=0.0):
    return Trajectory(np.array([[x, y, 0.0, v, 0.0, 0.0]]), ControlSample(0, 0))


def test_psi_goal():
    assert psi_goal(traj_ending_at(1, 2), (1, 2)) == 0.0
    assert psi_goal(traj_ending_at(3, 4), (0, 0)) == 5.0
    assert psi_goal(traj_ending_at(13, -6), (10, -10)) == 5.0


def test_psi_speed():
    assert psi_speed(traj_ending_at(0, 0, 8.0), 8.0) == 0.0
    assert psi_speed(traj_ending_at(0, 0, 0.0), 8.0) == 8.0
    assert psi_speed(traj_ending_at(0, 0, 9.0), 8.0) == 0.0


def test_empty_trajectory_rejected():
    empty = Trajectory(np.zeros((0, 6)), ControlSample(0, 0))
    with pytest.raises(ValueError):
        psi_goal(empty, (0, 0))
    with pytest.raises(ValueError):
        psi_speed(empty, 8.0)


@pytest.fixture
def cam():
    return forward_camera()


def ahead(v=5.0):
    return rollout(MotorcycleState(0, 0, 0, v), ControlSample(0, 0), params(horizon_T=2.0, dt=0.1))


def test_psi_risk_zero_and_constant_fields(cam):
    assert psi_risk(ahead(), RiskMap(np.zeros(cam.shape)), cam) == 0.0
    assert psi_risk(ahead(), RiskMap(np.full(cam.shape, 0.37)), cam) == pytest.approx(0.37)


def test_psi_risk_mean_of_visible_samples(cam):
    tr = ahead()
    m, n, valid = project_ground_points(tr.positions, cam)
    cols, rows = pixel_indices(m, n, cam)
    idx = np.flatnonzero(valid)
    assert len(idx) >= 4 and not valid.all()
    values = np.zeros(cam.shape)
    half = len(idx) // 2
    values[rows[idx[:half]], cols[idx[:half]]] = 0.8
    values[rows[idx[half : 2 * half]], cols[idx[half : 2 * half]]] = 0.2
    if len(idx) % 2:
        values[rows[idx[-1]], cols[idx[-1]]] = 0.5
    risk = RiskMap(values)
    assert psi_risk(tr, risk, cam) == pytest.approx(0.5)
    # counting off-image waypoints as zero dilutes the mean
    assert psi_risk(tr, risk, cam, offimage="zero") == pytest.approx(0.5 * len(idx) / len(tr))


def test_psi_risk_no_visible_samples(cam):
    behind = rollout(MotorcycleState(-30, 0, 0, 5.0), ControlSample(0, 0), params())
    assert psi_risk(behind, RiskMap(np.ones(cam.shape)), cam) == 0.0


def test_psi_risk_shape_check(cam):
    with pytest.raises(ValueError):
        psi_risk(ahead(), RiskMap(np.zeros((10, 10))), cam)


# --- selection -----------------------------------------------------------------------------


def test_tie_breaks():
    J = [1.0, 1.0, 1.0, 1.0, 2.0]
    a = [1.0, -0.5, 0.5, 0.0, 0.0]
    dd = [0.0, 0.1, 0.0, 0.1, 0.0]
    # lowest |ddelta| first, then lowest |a|
    assert select_best(J, a, dd) == 2
    assert select_best([1.0, 1.0], [0.5, -0.5], [0.1, -0.1]) == 0


def test_select_best_empty():
    with pytest.raises(ValueError):
        select_best([], [], [])


def reference_select(J, a, dd):
    return min(range(len(J)), key=lambda i: (J[i], abs(dd[i]), abs(a[i]), i))


@settings(max_examples=500)
@given(st.data())
def test_dominated_candidates_never_selected(data):
    n = data.draw(st.integers(2, 30))
    vals = st.floats(0, 10, allow_nan=False)
    psi = [[data.draw(vals) for _ in range(3)] for _ in range(n)]
    # make candidate 1 dominated by candidate 0
    psi[1] = [v + data.draw(st.floats(0, 1)) for v in psi[0]]
    k = data.draw(st.integers(0, 2))
    psi[1][k] = psi[0][k] + data.draw(st.floats(1e-3, 5))
    betas = [data.draw(st.floats(0.01, 50)) for _ in range(3)]
    p = params(beta_goal=betas[0], beta_speed=betas[1], beta_risk=betas[2])
    g, s, r = (np.array(c) for c in zip(*psi))
    J = total_cost(g, s, r, p)
    a = [data.draw(st.sampled_from([-2.0, 0.0, 2.0])) for _ in range(n)]
    dd = [data.draw(st.sampled_from([-0.1, 0.0, 0.1])) for _ in range(n)]
    chosen = select_best(J, a, dd)
    assert chosen != 1
    assert chosen == reference_select(list(J), a, dd)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 8), st.floats(0, 1)), min_size=1, max_size=40),
       st.floats(1e-3, 1e3))
def test_selection_invariant_to_beta_scaling(psi, scale):
    g, s, r = (np.array(c) for c in zip(*psi))
    a = np.zeros(len(psi))
    dd = np.zeros(len(psi))
    base = params(beta_goal=1.0, beta_speed=1.0, beta_risk=20.0)
    scaled = params(beta_goal=scale, beta_speed=scale, beta_risk=20.0 * scale)
    J0 = total_cost(g, s, r, base)
    J1 = total_cost(g, s, r, scaled)
    best = select_best(J0, a, dd)
    # costs within rounding distance of the minimum (but not equal to it) may
    # legitimately swap order after scaling; exact ties stay exact
    near = (J0 != J0[best]) & (np.abs(J0 - J0[best]) <= 1e-9 * max(J0[best], 1e-300))
    if not near.any():
        assert select_best(J1, a, dd) == best


# --- plan ---------------------------------------------------------------------------------


def zero_risk(cam):
    return RiskMap(np.zeros(cam.shape))


def exhaustive(x0, risk, cam, goal, p):
    best = None
    for i, u in enumerate(sample_controls(p)):
        tr = rollout(x0, u, p)
        J = (p.beta_goal * psi_goal(tr, goal) + p.beta_speed * psi_speed(tr, p.v_max)
             + p.beta_risk * psi_risk(tr, risk, cam, p.ground_offset, p.offimage))
        key = (J, abs(u.ddelta), abs(u.a), i)
        if best is None or key < best[0]:
            best = (key, u)
    return best[1]


def test_zero_risk_goal_ahead(cam):
    p = params()
    x0 = MotorcycleState(0, 0, 0, 5.0)
    result = plan(x0, zero_risk(cam), cam, (50.0, 0.0), p)
    assert result.best.ddelta == 0.0
    assert result.best == exhaustive(x0, zero_risk(cam), cam, (50.0, 0.0), p)
    # the largest acceleration makes the most progress toward a far goal
    assert result.best.a == p.a_max


def test_risk_only_selection(cam):
    p = params(beta_goal=0.0, beta_speed=0.0, beta_risk=1.0)
    values = np.zeros(cam.shape)
    values[:, 70:90] = 1.0  # vertical band straight ahead
    risk = RiskMap(values)
    result = plan(MotorcycleState(0, 0, 0, 5.0), risk, cam, (50.0, 0.0), p)
    best_risk = min(s.psi_risk for s in result.scores)
    chosen = next(s for s in result.scores if s.control == result.best)
    assert chosen.psi_risk == best_risk


def test_scores_are_consistent(cam):
    p = params()
    result = plan(MotorcycleState(0, 0, 0, 5.0), zero_risk(cam), cam, (50.0, 3.0), p)
    assert len(result.scores) == p.n_accel * p.n_steer
    for s in result.scores:
        assert s.J == p.beta_goal * s.psi_goal + p.beta_speed * s.psi_speed + p.beta_risk * s.psi_risk
    assert result.trajectory == rollout(MotorcycleState(0, 0, 0, 5.0), result.best, p)


def test_beta_scaling_keeps_plan(cam):
    values = np.zeros(cam.shape)
    values[60:, 60:100] = 0.9
    risk = RiskMap(values)
    x0 = MotorcycleState(0, 0, 0, 5.0)
    a = plan(x0, risk, cam, (40, 1.0), params())
    b = plan(x0, risk, cam, (40, 1.0), params(beta_goal=10.0, beta_speed=10.0, beta_risk=200.0))
    assert a.best == b.best


def test_plan_is_pure(cam):
    risk = RiskMap(np.random.default_rng(3).uniform(0, 1, cam.shape))
    x0 = MotorcycleState(0, 0, 0.1, 4.0)
    a = plan(x0, risk, cam, (30, 0), params())
    b = plan(x0, risk, cam, (30, 0), params())
    assert a.best == b.best and a.scores == b.scores and a.trajectory == b.trajectory


def test_lateral_samples_see_wider_band(cam):
    values = np.zeros(cam.shape)
    values[:, 86:96] = 1.0  # band just right of centre
    risk = RiskMap(values)
    tr = ahead()
    narrow = psi_risk(tr, risk, cam)
    from riskfield.planner import _risk_along

    wide = float(_risk_along(tr.data, risk, cam, 0.0, "exclude", (-0.5, 0.0, 0.5)))
    assert narrow == 0.0 and wide > 0.0


def test_empty_control_set(cam):
    with pytest.raises(ValueError, match="empty"):
        plan(MotorcycleState(0, 0, 0, 1), zero_risk(cam), cam, (5, 0), params(), controls=[])


def test_scores_csv(tmp_path, cam):
    result = plan(MotorcycleState(0, 0, 0, 5.0), zero_risk(cam), cam, (50.0, 0.0), params(n_accel=2, n_steer=2))
    write_scores_csv(tmp_path / "s.csv", result.scores)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["a", "ddelta", "psi_goal", "psi_speed", "psi_risk", "J"]
    assert len(rows) == 5
    assert float(rows[1][5]) == result.scores[0].J
