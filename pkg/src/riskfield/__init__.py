"""Hazard risk maps and a risk-aware sampling planner for motorcycle rider assistance."""

from .config import NoiseParams, PlannerParams, RiskParams, SimParams, TrialParams
from .scene import CameraModel, Hazard, MotorcycleState, Scenario, camera_pose_at, load_scenario

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "Hazard",
    "MotorcycleState",
    "NoiseParams",
    "PlannerParams",
    "RiskParams",
    "Scenario",
    "SimParams",
    "TrialParams",
    "camera_pose_at",
    "load_scenario",
]
