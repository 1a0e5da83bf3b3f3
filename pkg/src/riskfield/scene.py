"""World model: motorcycle state, hazards, camera, scenarios and the scenario file loader.

Frames: world is right-handed with x forward along the initial road direction,
y left and z up; the road surface is the plane z = 0.  The camera frame has +Z
along the optical axis, +X right and +Y down.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import geometry
from .config import (
    ConfigError,
    PlannerParams,
    RiskParams,
    SimParams,
    TrialParams,
    from_dict,
    replace_field,
    to_dict,
)


class ScenarioError(ValueError):
    """Base class for scenario loading problems."""


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    pass


@dataclass(frozen=True)
class MotorcycleState:
    """Planar bicycle state plus the lean angle, which only perception sees."""

    x: float
    y: float
    theta: float
    v: float
    delta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "theta", "v", "delta", "phi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"state field {name} is not finite")
        if self.v < 0:
            raise ValueError("speed must be >= 0")
        object.__setattr__(self, "theta", geometry.wrap_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.v, self.delta, self.phi])

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Hazard:
    id: str
    label: str
    footprint: tuple[tuple[float, float], ...]
    depth_m: float = 0.0
    base_context_score: float = 0.5

    def __post_init__(self):
        object.__setattr__(
            self, "footprint", tuple((float(x), float(y)) for x, y in self.footprint)
        )
        if not geometry.is_simple_polygon(self.footprint):
            raise ValueError(f"hazard {self.id!r}: footprint is not a simple polygon")
        if not self.depth_m >= 0:
            raise ValueError(f"hazard {self.id!r}: depth_m must be >= 0")
        if not 0.0 <= self.base_context_score <= 1.0:
            raise ValueError(f"hazard {self.id!r}: base_context_score outside [0, 1]")

    @property
    def vertices(self) -> np.ndarray:
        return np.asarray(self.footprint, dtype=float)

    @property
    def centroid(self) -> tuple[float, float]:
        return geometry.polygon_centroid(self.footprint)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "label": self.label,
            "footprint": [list(v) for v in self.footprint],
            "depth_m": self.depth_m,
            "base_context_score": self.base_context_score,
        }


@dataclass(frozen=True, eq=False)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    T_cw: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        T = np.array(self.T_cw, dtype=float)
        T.setflags(write=False)
        object.__setattr__(self, "T_cw", T)
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (isinstance(self.width, int) and isinstance(self.height, int)):
            raise ValueError("image dimensions must be integers")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")
        if not geometry.is_rigid(T):
            raise ValueError("T_cw is not a proper rigid transform")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def T_wc(self) -> np.ndarray:
        return geometry.invert_transform(self.T_cw)

    def with_pose(self, T_cw: np.ndarray) -> "CameraModel":
        return dataclasses.replace(self, T_cw=T_cw)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CameraModel):
            return NotImplemented
        return (
            (self.fx, self.fy, self.cx, self.cy, self.width, self.height)
            == (other.fx, other.fy, other.cx, other.cy, other.width, other.height)
            and np.array_equal(self.T_cw, other.T_cw)
        )

    __hash__ = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "T_cw": self.T_cw.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CameraModel":
        return cls(
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            width=int(data["width"]),
            height=int(data["height"]),
            T_cw=np.asarray(data.get("T_cw", np.eye(4)), dtype=float),
        )


def camera_pose_at(
    state: MotorcycleState, mount: np.ndarray, camera: CameraModel
) -> CameraModel:
    """Camera following the body pose ``(x, y, theta)``.

    ``mount`` is the camera pose in the body frame (camera-to-body).  The
    returned camera keeps the intrinsics of ``camera`` and carries
    ``T_cw = (T_wb @ mount)^-1``.
    """
    T_wc = geometry.body_to_world(state.x, state.y, state.theta) @ mount
    return camera.with_pose(geometry.invert_transform(T_wc))


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    road: geometry.Corridor
    hazards: tuple[Hazard, ...]
    start: MotorcycleState
    goal: tuple[float, float]
    camera: CameraModel
    mount: np.ndarray
    planner_params: PlannerParams = field(default_factory=PlannerParams)
    risk_params: RiskParams = field(default_factory=RiskParams)
    sim_params: SimParams = field(default_factory=SimParams)
    trials: TrialParams = field(default_factory=TrialParams)
    description: str = ""

    def __post_init__(self):
        mount = np.array(self.mount, dtype=float)
        mount.setflags(write=False)
        object.__setattr__(self, "mount", mount)
        object.__setattr__(self, "hazards", tuple(self.hazards))
        object.__setattr__(self, "goal", (float(self.goal[0]), float(self.goal[1])))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            same = np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b
            if not same:
                return False
        return True

    __hash__ = None

    def camera_at(self, state: MotorcycleState) -> CameraModel:
        return camera_pose_at(state, self.mount, self.camera)

    def hazard(self, hazard_id: str) -> Hazard:
        for h in self.hazards:
            if h.id == hazard_id:
                return h
        raise KeyError(hazard_id)

    def with_start(self, start: MotorcycleState) -> "Scenario":
        return dataclasses.replace(self, start=start)

    def with_overrides(self, overrides: list[tuple[str, str, Any]]) -> "Scenario":
        """Apply ``(section, field, value)`` overrides and revalidate."""
        sections = {
            "riskmap": "risk_params",
            "planner": "planner_params",
            "simulation": "sim_params",
            "trials": "trials",
        }
        out = self
        for section, name, value in overrides:
            key = f"{section}.{name}"
            if section == "noise":
                trials = out.trials
                noise = replace_field(trials.noise, name, value, key)
                out = dataclasses.replace(out, trials=dataclasses.replace(trials, noise=noise))
            elif section in sections:
                attr = sections[section]
                out = dataclasses.replace(
                    out, **{attr: replace_field(getattr(out, attr), name, value, key)}
                )
            else:
                raise ConfigError(f"unknown parameter section {section!r} in {key!r}")
        validate_scenario(out)
        return out

    def to_dict(self) -> dict[str, Any]:
        """Effective configuration, in the scenario file schema."""
        return {
            "name": self.name,
            "description": self.description,
            "road": {"centerline": [list(p) for p in self.road.centerline], "width": self.road.width},
            "hazards": [h.to_dict() for h in self.hazards],
            "start": self.start.to_dict(),
            "goal": list(self.goal),
            "camera": {
                "width": self.camera.width,
                "height": self.camera.height,
                "intrinsics": {
                    "fx": self.camera.fx,
                    "fy": self.camera.fy,
                    "cx": self.camera.cx,
                    "cy": self.camera.cy,
                },
                "mount": {"matrix": self.mount.tolist()},
            },
            "planner_params": to_dict(self.planner_params),
            "risk_params": to_dict(self.risk_params),
            "simulation": to_dict(self.sim_params),
            "trials": to_dict(self.trials),
        }


def validate_scenario(scn: Scenario) -> None:
    """Raise :class:`ScenarioValidationError` naming the first violated invariant."""
    if not scn.road.contains(*scn.goal):
        raise ScenarioValidationError("goal outside corridor")
    if not scn.road.contains(scn.start.x, scn.start.y):
        raise ScenarioValidationError("start outside corridor")
    if abs(scn.start.delta) > scn.planner_params.delta_max:
        raise ScenarioValidationError("start steering angle exceeds delta_max")
    ids = [h.id for h in scn.hazards]
    if len(set(ids)) != len(ids):
        raise ScenarioValidationError("hazard ids are not unique")
    for h in scn.hazards:
        if geometry.points_in_polygon(scn.start.x, scn.start.y, h.vertices):
            raise ScenarioValidationError(f"start inside hazard {h.id!r}")
    if not geometry.is_rigid(scn.mount):
        raise ScenarioValidationError("camera mount is not a proper rigid transform")


_TOP_LEVEL = {
    "name",
    "description",
    "road",
    "hazards",
    "start",
    "goal",
    "camera",
    "planner_params",
    "risk_params",
    "simulation",
    "trials",
}
_REQUIRED = ("name", "road", "hazards", "start", "goal", "camera")


def _parse_road(data: dict[str, Any]) -> geometry.Corridor:
    if "centerline" in data:
        return geometry.Corridor(data["centerline"], data["width"])
    # rectangle form: x range along the road axis, y range across it
    (x0, x1), (y0, y1) = data["x_range"], data["y_range"]
    yc = (y0 + y1) / 2.0
    return geometry.Corridor([(x0, yc), (x1, yc)], y1 - y0)


def _parse_mount(data: dict[str, Any]) -> np.ndarray:
    if "matrix" in data:
        return np.asarray(data["matrix"], dtype=float)
    return geometry.mount_transform(
        data.get("position", (0.0, 0.0, 0.0)),
        pitch=float(data.get("pitch", 0.0)),
        yaw=float(data.get("yaw", 0.0)),
        roll=float(data.get("roll", 0.0)),
    )


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioParseError("scenario document must be an object")
    unknown = sorted(set(data) - _TOP_LEVEL)
    if unknown:
        raise ScenarioParseError(f"unknown top-level key(s): {', '.join(unknown)}")
    for key in _REQUIRED:
        if key not in data:
            raise ScenarioParseError(f"missing top-level key {key!r}")
    try:
        road = _parse_road(data["road"])
        hazards = tuple(
            Hazard(
                id=str(h["id"]),
                label=str(h["label"]),
                footprint=tuple(tuple(v) for v in h["footprint"]),
                depth_m=float(h.get("depth_m", 0.0)),
                base_context_score=float(h.get("base_context_score", 0.5)),
            )
            for h in data["hazards"]
        )
        start = MotorcycleState(**{k: float(v) for k, v in data["start"].items()})
        goal = tuple(float(v) for v in data["goal"])
        if len(goal) != 2:
            raise ValueError("goal must be [x, y]")
        cam = data["camera"]
        intr = cam["intrinsics"]
        camera = CameraModel(
            fx=float(intr["fx"]),
            fy=float(intr["fy"]),
            cx=float(intr["cx"]),
            cy=float(intr["cy"]),
            width=int(cam["width"]),
            height=int(cam["height"]),
        )
        mount = _parse_mount(cam.get("mount", {}))
        scn = Scenario(
            name=str(data["name"]),
            description=str(data.get("description", "")),
            road=road,
            hazards=hazards,
            start=start,
            goal=goal,
            camera=camera,
            mount=mount,
            planner_params=from_dict(PlannerParams, data.get("planner_params")),
            risk_params=from_dict(RiskParams, data.get("risk_params")),
            sim_params=from_dict(SimParams, data.get("simulation")),
            trials=from_dict(TrialParams, data.get("trials")),
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        what = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        raise ScenarioValidationError(what) from None
    validate_scenario(scn)
    return scn


BUNDLED = ("scenario1", "scenario2", "scenario3")


def bundled_scenario_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".json") else name
    path = Path(str(resources.files("riskfield") / "scenarios" / f"{stem}.json"))
    if not path.exists():
        raise FileNotFoundError(f"no bundled scenario named {name!r}")
    return path


def resolve_scenario_path(ref: str | Path) -> Path:
    """A filesystem path, or the name of a bundled scenario."""
    path = Path(ref)
    if path.exists():
        return path
    try:
        return bundled_scenario_path(path.name)
    except FileNotFoundError:
        raise FileNotFoundError(f"scenario file not found: {ref}") from None


def load_scenario(path: str | Path) -> Scenario:
    path = resolve_scenario_path(path)
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    return scenario_from_dict(data)
