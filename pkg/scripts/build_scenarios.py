"""Regenerate the bundled scenario files in src/riskfield/scenarios/.

Hazard sizes and depths are this package's choices; they are not measured
values from any dataset.

    python scripts/build_scenarios.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "riskfield" / "scenarios"

LANE_Y = -1.75  # centre of the right-hand lane on a 7 m two-lane road


def blob(cx, cy, length, width, n=10, wobble=0.08, phase=0.0):
    """Irregular convex-ish pothole outline: an ellipse with a small radial wobble."""
    pts = []
    for k in range(n):
        t = 2 * math.pi * k / n
        r = 1.0 + wobble * math.sin(3 * t + phase)
        pts.append([round(cx + 0.5 * length * r * math.cos(t), 4),
                    round(cy + 0.5 * width * r * math.sin(t), 4)])
    return pts


def square(cx, cy, side):
    h = side / 2
    return [[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]]


CAMERA = {
    "width": 320,
    "height": 240,
    "intrinsics": {"fx": 250.0, "fy": 250.0, "cx": 159.5, "cy": 119.5},
    # 0.3 m ahead of the body centre, 1.2 m above the road, tilted 0.15 rad down
    "mount": {"position": [0.3, 0.0, 1.2], "pitch": 0.15},
}

PLANNER = {
    "a_min": -2.0,
    "a_max": 2.0,
    "n_accel": 3,
    "ddelta_min": -0.1,
    "ddelta_max": 0.1,
    "n_steer": 11,
    "v_max": 8.0,
    "v_limit": 8.0,
    "beta_goal": 1.0,
    "beta_speed": 1.0,
    "beta_risk": 100.0,
    # body half-width 0.4 m plus 0.1 m margin
    "lateral_samples": [-0.5, 0.0, 0.5],
}

TRIALS = {
    "lateral_offset": [-0.5, 0.5],
    "provider": "noisy",
    "noise": {"confidence_std": 0.1, "c_vlm_std": 0.1, "dropout": 0.05, "mask_radius": 1},
}


SIMULATION = {
    # potholes can be ridden over; keep going so exposure covers the whole run
    "stop_on_contact": False,
}


def scenario(name, description, road, hazards, start_y, goal):
    return {
        "name": name,
        "description": description,
        "road": road,
        "hazards": hazards,
        "start": {"x": 0.0, "y": start_y, "theta": 0.0, "v": 6.0, "delta": 0.0, "phi": 0.0},
        "goal": goal,
        "camera": CAMERA,
        "planner_params": PLANNER,
        "risk_params": {},
        "simulation": SIMULATION,
        "trials": TRIALS,
    }


def main():
    two_lane = {"centerline": [[-10.0, 0.0], [90.0, 0.0]], "width": 7.0}
    scenarios = [
        scenario(
            "scenario1",
            "Small pothole (0.6 m x 0.5 m, 6 cm deep) in the centre of the rider's lane.",
            two_lane,
            [{"id": "pothole-1", "label": "pothole", "footprint": blob(25.0, LANE_Y, 0.6, 0.5),
              "depth_m": 0.06, "base_context_score": 0.8}],
            LANE_Y,
            [60.0, LANE_Y],
        ),
        scenario(
            "scenario2",
            "Large pothole (1.6 m x 1.2 m, 12 cm deep) at the centre of a 6 m single-lane road.",
            {"centerline": [[-10.0, 0.0], [90.0, 0.0]], "width": 6.0},
            [{"id": "pothole-1", "label": "pothole", "footprint": blob(25.0, 0.0, 1.6, 1.2, phase=1.0),
              "depth_m": 0.12, "base_context_score": 0.9}],
            0.0,
            [60.0, 0.0],
        ),
        scenario(
            "scenario3",
            "Large pothole (1.4 m x 1.0 m, 10 cm deep) in the rider's lane behind a warning cone.",
            two_lane,
            [{"id": "pothole-1", "label": "pothole", "footprint": blob(28.0, LANE_Y, 1.4, 1.0, phase=2.0),
              "depth_m": 0.10, "base_context_score": 0.9},
             {"id": "cone-1", "label": "cone", "footprint": square(24.0, LANE_Y + 0.3, 0.4),
              "depth_m": 0.0, "base_context_score": 0.6}],
            LANE_Y,
            [60.0, LANE_Y],
        ),
    ]
    OUT.mkdir(parents=True, exist_ok=True)
    for s in scenarios:
        (OUT / f"{s['name']}.json").write_text(json.dumps(s, indent=2) + "\n")
        print("wrote", OUT / f"{s['name']}.json")


if __name__ == "__main__":
    main()
