"""Parameter dataclasses and ``section.field=value`` override plumbing."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any


class ConfigError(ValueError):
    """Invalid parameter value or unknown override key."""


@dataclass(frozen=True)
class RiskParams:
    """Weights and shaping constants of the per-hazard cost and the map ceiling."""

    alpha_vlm: float = 0.5
    alpha_area: float = 0.2
    alpha_conf: float = 0.1
    alpha_depth: float = 0.2
    kappa_a: float = 50.0
    eta_a: float = 0.05
    d_ref: float = 0.15
    c_max: float = 1.0

    def __post_init__(self):
        for name in ("alpha_vlm", "alpha_area", "alpha_conf", "alpha_depth"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.d_ref > 0:
            raise ConfigError("d_ref must be > 0")
        if not self.c_max > 0:
            raise ConfigError("c_max must be > 0")

    def without_context(self) -> "RiskParams":
        """Drop the contextual weight and rescale the rest to keep the total weight."""
        rest = self.alpha_area + self.alpha_conf + self.alpha_depth
        total = rest + self.alpha_vlm
        if rest == 0.0:
            return dataclasses.replace(self, alpha_vlm=0.0)
        scale = total / rest
        return dataclasses.replace(
            self,
            alpha_vlm=0.0,
            alpha_area=self.alpha_area * scale,
            alpha_conf=self.alpha_conf * scale,
            alpha_depth=self.alpha_depth * scale,
        )


OFFIMAGE_MODES = ("exclude", "zero")


@dataclass(frozen=True)
class PlannerParams:
    a_min: float = -3.0
    a_max: float = 2.0
    ddelta_min: float = -0.2
    ddelta_max: float = 0.2
    n_accel: int = 5
    n_steer: int = 9
    dt: float = 0.05
    horizon_T: float = 2.0
    wheelbase_L: float = 1.4
    v_max: float = 8.0
    delta_max: float = 0.6
    beta_goal: float = 1.0
    beta_speed: float = 1.0
    beta_risk: float = 20.0
    offimage: str = "exclude"
    ground_offset: float = 0.0
    # hard speed ceiling applied inside the dynamics; None leaves speed unbounded above
    v_limit: float | None = None
    # lateral offsets (m, left positive) sampled at each waypoint; the waypoint's
    # risk is the max over them.  (0.0,) samples the waypoint alone.
    lateral_samples: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if not self.a_min <= self.a_max:
            raise ConfigError("a_min must be <= a_max")
        if not self.ddelta_min <= self.ddelta_max:
            raise ConfigError("ddelta_min must be <= ddelta_max")
        if not self.dt > 0:
            raise ConfigError("dt must be > 0")
        if not self.horizon_T >= self.dt:
            raise ConfigError("horizon_T must be >= dt")
        if not self.wheelbase_L > 0:
            raise ConfigError("wheelbase_L must be > 0")
        if not self.v_max > 0:
            raise ConfigError("v_max must be > 0")
        if not self.delta_max > 0:
            raise ConfigError("delta_max must be > 0")
        if self.n_accel < 1 or self.n_steer < 1:
            raise ConfigError("sample counts must be >= 1")
        for name in ("beta_goal", "beta_speed", "beta_risk"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        object.__setattr__(self, "lateral_samples", tuple(float(v) for v in self.lateral_samples))
        if not self.lateral_samples:
            raise ConfigError("lateral_samples must not be empty")
        if self.v_limit is not None and not self.v_limit > 0:
            raise ConfigError("v_limit must be > 0 or null")
        if self.offimage not in OFFIMAGE_MODES:
            raise ConfigError(f"offimage must be one of {OFFIMAGE_MODES}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_T / self.dt))


@dataclass(frozen=True)
class NoiseParams:
    """Perturbations applied by the noisy perception provider."""

    confidence_std: float = 0.0
    c_vlm_std: float = 0.0
    dropout: float = 0.0
    mask_radius: int = 0

    def __post_init__(self):
        if self.confidence_std < 0 or self.c_vlm_std < 0:
            raise ConfigError("noise std must be >= 0")
        if not 0.0 <= self.dropout <= 1.0:
            raise ConfigError("dropout must be in [0, 1]")
        if self.mask_radius < 0:
            raise ConfigError("mask_radius must be >= 0")

    @property
    def is_zero(self) -> bool:
        return (
            self.confidence_std == 0
            and self.c_vlm_std == 0
            and self.dropout == 0
            and self.mask_radius == 0
        )


DEFAULT_PROMPT = (
    "You are assisting a motorcycle rider. Think step by step: list every object "
    "on or near the road that could affect a two-wheeled vehicle, then rate each "
    "one from 0 (no risk) to 10 (high risk) given the rider's speed and lean angle."
)


@dataclass(frozen=True)
class SimParams:
    goal_radius: float = 1.0
    max_steps: int = 1200
    body_length: float = 2.0
    body_width: float = 0.8
    obstacle_labels: tuple[str, ...] = ("cone",)
    prompt: str = DEFAULT_PROMPT
    # end the episode at the first hazard contact; when False the run continues
    # (surface hazards are traversable) and the contact is only recorded
    stop_on_contact: bool = True

    def __post_init__(self):
        if not self.goal_radius > 0:
            raise ConfigError("goal_radius must be > 0")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not (self.body_length > 0 and self.body_width > 0):
            raise ConfigError("body dimensions must be > 0")
        object.__setattr__(self, "obstacle_labels", tuple(self.obstacle_labels))


PROVIDERS = ("oracle", "noisy", "external")


@dataclass(frozen=True)
class TrialParams:
    """How batch trials differ from one another."""

    lateral_offset: tuple[float, float] = (-0.5, 0.5)
    provider: str = "noisy"
    noise: NoiseParams = field(default_factory=NoiseParams)

    def __post_init__(self):
        lo, hi = self.lateral_offset
        if lo > hi:
            raise ConfigError("lateral_offset range is reversed")
        object.__setattr__(self, "lateral_offset", (float(lo), float(hi)))
        if self.provider not in PROVIDERS:
            raise ConfigError(f"provider must be one of {PROVIDERS}")


def from_dict(cls, data: dict[str, Any] | None):
    """Build a params dataclass from a mapping, rejecting unknown keys."""
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} field(s): {', '.join(unknown)}")
    if cls is TrialParams and isinstance(data.get("noise"), dict):
        data["noise"] = from_dict(NoiseParams, data["noise"])
    for key in ("lateral_offset", "lateral_samples", "obstacle_labels"):
        if key in data:
            data[key] = tuple(data[key])
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def to_dict(obj) -> dict[str, Any]:
    out = dataclasses.asdict(obj)
    for key, value in out.items():
        if isinstance(value, tuple):
            out[key] = list(value)
    return out


def parse_override(text: str) -> tuple[str, str, Any]:
    """Split ``section.field=value``; the value is parsed as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.field=value")
    key, raw = text.split("=", 1)
    if key.count(".") != 1:
        raise ConfigError(f"override key {key!r} must be section.field")
    section, name = key.split(".")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return section, name, value


def _coerce(current: Any, value: Any, key: str) -> Any:
    if current is None or value is None:
        if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"{key} expects a number or null")
        return None if value is None else float(value)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} expects true/false")
        return value
    if isinstance(current, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key} expects an integer")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} expects a number")
        return float(value)
    if isinstance(current, tuple):
        if isinstance(value, str):
            value = [v for v in value.split(",") if v]
        return tuple(value)
    return value


def replace_field(obj, name: str, value: Any, key: str):
    names = {f.name: f for f in dataclasses.fields(obj)}
    if name not in names:
        raise ConfigError(f"unknown parameter {key!r}")
    value = _coerce(getattr(obj, name), value, key)
    return dataclasses.replace(obj, **{name: value})
