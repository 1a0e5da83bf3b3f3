"""Sampling planner over kinematic bicycle rollouts scored against the risk map."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .config import PlannerParams
from .geometry import wrap_angles
from .projection import pixel_indices, project_ground_points
from .riskmap import RiskMap
from .scene import CameraModel, MotorcycleState

__all__ = [
    "PlannerParams",
    "ControlSample",
    "Trajectory",
    "TrajectoryScore",
    "PlanResult",
    "euler_step",
    "step",
    "rollout",
    "rollout_batch",
    "sample_controls",
    "psi_goal",
    "psi_speed",
    "psi_risk",
    "select_best",
    "plan",
]

# column layout of trajectory arrays
X, Y, THETA, V, DELTA, PHI = range(6)


@dataclass(frozen=True)
class ControlSample:
    a: float
    ddelta: float


def euler_step(x, y, theta, v, delta, a, ddelta, dt, wheelbase, delta_max, v_limit=None):
    """One explicit-Euler step of the bicycle model on arrays.

    Every update reads the pre-step values.  Steering integrates the rate and
    saturates at +/-delta_max; speed never goes negative and, when ``v_limit``
    is set, never above it.
    """
    x_new = x + v * np.cos(theta) * dt
    y_new = y + v * np.sin(theta) * dt
    theta_new = wrap_angles(theta + v / wheelbase * np.tan(delta) * dt)
    v_new = np.maximum(v + a * dt, 0.0)
    if v_limit is not None:
        v_new = np.minimum(v_new, v_limit)
    delta_new = np.clip(delta + ddelta * dt, -delta_max, delta_max)
    return x_new, y_new, theta_new, v_new, delta_new


def step(state: MotorcycleState, control: ControlSample, dt: float, params: PlannerParams) -> MotorcycleState:
    cols = euler_step(
        np.array([state.x]),
        np.array([state.y]),
        np.array([state.theta]),
        np.array([state.v]),
        np.array([state.delta]),
        np.array([control.a]),
        np.array([control.ddelta]),
        dt,
        params.wheelbase_L,
        params.delta_max,
        params.v_limit,
    )
    x, y, theta, v, delta = (float(c[0]) for c in cols)
    return MotorcycleState(x, y, theta, v, delta, state.phi)


def rollout_batch(x0: MotorcycleState, a: np.ndarray, ddelta: np.ndarray, params: PlannerParams) -> np.ndarray:
    """States of every candidate at dt, 2dt, ..., horizon: shape ``(N, K, 6)``."""
    a = np.asarray(a, dtype=float)
    ddelta = np.asarray(ddelta, dtype=float)
    n = a.shape[0]
    k = params.n_steps
    out = np.empty((n, k, 6))
    x = np.full(n, x0.x)
    y = np.full(n, x0.y)
    theta = np.full(n, x0.theta)
    v = np.full(n, x0.v)
    delta = np.full(n, x0.delta)
    for i in range(k):
        x, y, theta, v, delta = euler_step(
            x, y, theta, v, delta, a, ddelta,
            params.dt, params.wheelbase_L, params.delta_max, params.v_limit,
        )
        out[:, i, X] = x
        out[:, i, Y] = y
        out[:, i, THETA] = theta
        out[:, i, V] = v
        out[:, i, DELTA] = delta
    out[:, :, PHI] = x0.phi
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    data: np.ndarray  # (K, 6): x, y, theta, v, delta, phi
    control: ControlSample

    def __len__(self) -> int:
        return len(self.data)

    @property
    def states(self) -> list[MotorcycleState]:
        return [MotorcycleState(*map(float, row)) for row in self.data]

    @property
    def positions(self) -> np.ndarray:
        return self.data[:, :2]

    @property
    def final(self) -> MotorcycleState:
        return MotorcycleState(*map(float, self.data[-1]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.control == other.control and np.array_equal(self.data, other.data)

    __hash__ = None


def rollout(x0: MotorcycleState, u: ControlSample, params: PlannerParams) -> Trajectory:
    data = rollout_batch(x0, np.array([u.a]), np.array([u.ddelta]), params)[0]
    return Trajectory(data, u)


def _axis(lo: float, hi: float, count: int) -> np.ndarray:
    if count == 1:
        return np.array([(lo + hi) / 2.0])
    return np.linspace(lo, hi, count)


def sample_controls(params: PlannerParams) -> list[ControlSample]:
    accels = _axis(params.a_min, params.a_max, params.n_accel)
    rates = _axis(params.ddelta_min, params.ddelta_max, params.n_steer)
    return [ControlSample(float(a), float(d)) for a in accels for d in rates]


# --- cost terms ---------------------------------------------------------------


def psi_goal(traj: Trajectory, goal: Sequence[float]) -> float:
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    x, y = traj.data[-1, X], traj.data[-1, Y]
    return float(np.hypot(x - goal[0], y - goal[1]))


def psi_speed(traj: Trajectory, v_max: float) -> float:
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    return max(0.0, v_max - float(traj.data[-1, V]))


def _risk_along(
    states: np.ndarray,
    risk: RiskMap,
    camera: CameraModel,
    ground_offset: float,
    offimage: str,
    lateral_samples: Sequence[float] = (0.0,),
) -> np.ndarray:
    """Mean sampled risk along each row of waypoints ``(..., K, >=3)`` (x, y, theta)."""
    if risk.shape != camera.shape:
        raise ValueError(f"risk map {risk.shape} does not match camera {camera.shape}")
    xy = states[..., :2]
    if tuple(lateral_samples) == (0.0,):
        m, n, valid = project_ground_points(xy, camera, ground_offset)
        cols, rows = pixel_indices(m, n, camera)
        sampled = np.where(valid, risk.values[rows, cols], 0.0)
    else:
        theta = states[..., THETA]
        left = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        sampled = np.zeros(xy.shape[:-1])
        valid = np.zeros(xy.shape[:-1], dtype=bool)
        for off in lateral_samples:
            m, n, ok = project_ground_points(xy + off * left, camera, ground_offset)
            cols, rows = pixel_indices(m, n, camera)
            sampled = np.maximum(sampled, np.where(ok, risk.values[rows, cols], 0.0))
            valid |= ok
    total = sampled.sum(axis=-1)
    if offimage == "zero":
        return total / xy.shape[-2]
    count = valid.sum(axis=-1)
    return np.where(count > 0, total / np.maximum(count, 1), 0.0)


def psi_risk(
    traj: Trajectory,
    risk: RiskMap,
    camera: CameraModel,
    ground_offset: float = 0.0,
    offimage: str = "exclude",
) -> float:
    """Mean risk under the projected waypoints.

    ``offimage="exclude"`` drops waypoints that fall outside the image or
    behind the camera; ``"zero"`` counts them as zero risk.
    """
    return float(_risk_along(traj.data, risk, camera, ground_offset, offimage))


@dataclass(frozen=True)
class TrajectoryScore:
    control: ControlSample
    psi_goal: float
    psi_speed: float
    psi_risk: float
    J: float


def total_cost(psi_g, psi_s, psi_r, params: PlannerParams):
    return params.beta_goal * psi_g + params.beta_speed * psi_s + params.beta_risk * psi_r


def select_best(J: Sequence[float], a: Sequence[float], ddelta: Sequence[float]) -> int:
    """Index of the minimum cost; ties go to smaller |ddelta|, then smaller |a|, then order."""
    J = np.asarray(J, dtype=float)
    if J.size == 0:
        raise ValueError("no candidates to select from")
    order = np.arange(J.size)
    keys = (order, np.abs(np.asarray(a, dtype=float)), np.abs(np.asarray(ddelta, dtype=float)), J)
    return int(np.lexsort(keys)[0])


class PlanResult(NamedTuple):
    best: ControlSample
    trajectory: Trajectory
    scores: list[TrajectoryScore]


def plan(
    x0: MotorcycleState,
    risk: RiskMap,
    camera: CameraModel,
    goal: Sequence[float],
    params: PlannerParams,
    controls: Sequence[ControlSample] | None = None,
) -> PlanResult:
    controls = sample_controls(params) if controls is None else list(controls)
    if not controls:
        raise ValueError("empty control set")
    a = np.array([u.a for u in controls])
    dd = np.array([u.ddelta for u in controls])
    trajs = rollout_batch(x0, a, dd, params)
    final = trajs[:, -1]
    pg = np.hypot(final[:, X] - goal[0], final[:, Y] - goal[1])
    ps = np.maximum(0.0, params.v_max - final[:, V])
    pr = _risk_along(
        trajs, risk, camera, params.ground_offset, params.offimage, params.lateral_samples
    )
    J = total_cost(pg, ps, pr, params)
    best = select_best(J, a, dd)
    scores = [
        TrajectoryScore(u, float(g), float(s), float(r), float(j))
        for u, g, s, r, j in zip(controls, pg, ps, pr, J)
    ]
    return PlanResult(controls[best], Trajectory(trajs[best], controls[best]), scores)


def write_scores_csv(path, scores: Sequence[TrajectoryScore]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["a", "ddelta", "psi_goal", "psi_speed", "psi_risk", "J"])
        for s in scores:
            w.writerow([repr(s.control.a), repr(s.control.ddelta), repr(s.psi_goal),
                        repr(s.psi_speed), repr(s.psi_risk), repr(s.J)])
