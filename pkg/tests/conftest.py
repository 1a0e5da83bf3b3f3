from __future__ import annotations

import numpy as np
import pytest

from riskfield.geometry import Corridor, mount_transform
from riskfield.scene import CameraModel, Hazard, MotorcycleState, Scenario, camera_pose_at


def forward_camera(width=160, height=120, f=120.0, height_m=1.2, pitch=0.2, state=None):
    """Camera mounted at the body origin looking down the +x axis."""
    base = CameraModel(fx=f, fy=f, cx=(width - 1) / 2, cy=(height - 1) / 2, width=width, height=height)
    state = state or MotorcycleState(0.0, 0.0, 0.0, 0.0)
    return camera_pose_at(state, mount_transform((0.0, 0.0, height_m), pitch=pitch), base)


def square(cx, cy, side):
    h = side / 2
    return ((cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h))


def small_scenario(hazards=(), start_y=0.0, goal=(40.0, 0.0), **kw):
    camera = CameraModel(fx=120.0, fy=120.0, cx=79.5, cy=59.5, width=160, height=120)
    return Scenario(
        name=kw.pop("name", "test"),
        road=Corridor(((-10.0, 0.0), (80.0, 0.0)), 8.0),
        hazards=tuple(hazards),
        start=MotorcycleState(0.0, start_y, 0.0, 5.0),
        goal=goal,
        camera=camera,
        mount=mount_transform((0.3, 0.0, 1.2), pitch=0.15),
        **kw,
    )


@pytest.fixture
def camera():
    return forward_camera()


@pytest.fixture
def pothole():
    return Hazard("p1", "pothole", square(12.0, 0.0, 1.5), depth_m=0.08, base_context_score=0.8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
