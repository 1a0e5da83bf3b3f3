"""Planar and rigid-body geometry helpers shared by the scene, projection and simulator."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from shapely.geometry import LineString, Point, Polygon

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    if -math.pi < theta <= math.pi:
        return theta
    wrapped = math.fmod(theta + math.pi, TWO_PI)
    if wrapped <= 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized :func:`wrap_angle`; in-range entries are returned untouched."""
    out_of_range = (theta <= -np.pi) | (theta > np.pi)
    if not out_of_range.any():
        return theta
    wrapped = np.fmod(theta + np.pi, TWO_PI)
    wrapped = np.where(wrapped <= 0.0, wrapped + TWO_PI, wrapped) - np.pi
    return np.where(out_of_range, wrapped, theta)


# --- rigid transforms -------------------------------------------------------


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def make_transform(rotation: np.ndarray, translation: Sequence[float]) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = rotation
    T[:3, 3] = translation
    return T


def invert_transform(T: np.ndarray) -> np.ndarray:
    """Inverse of a rigid 4x4 transform (uses R^T, not a general inverse)."""
    R = T[:3, :3]
    t = T[:3, 3]
    return make_transform(R.T, -R.T @ t)


def is_rigid(T: np.ndarray, tol: float = 1e-6) -> bool:
    T = np.asarray(T, dtype=float)
    if T.shape != (4, 4) or not np.all(np.isfinite(T)):
        return False
    R = T[:3, :3]
    if not np.allclose(R.T @ R, np.eye(3), atol=tol):
        return False
    if abs(np.linalg.det(R) - 1.0) > tol:
        return False
    return bool(np.allclose(T[3], [0.0, 0.0, 0.0, 1.0], atol=tol))


def body_to_world(x: float, y: float, theta: float) -> np.ndarray:
    """Pose of the planar body frame (x forward, y left, z up) in the world."""
    return make_transform(rot_z(theta), (x, y, 0.0))


# Camera axes (+X right, +Y down, +Z optical axis) expressed in the body frame.
CAMERA_AXES_IN_BODY = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)


def mount_transform(
    position: Sequence[float], pitch: float = 0.0, yaw: float = 0.0, roll: float = 0.0
) -> np.ndarray:
    """Camera pose in the body frame for a forward-looking camera.

    ``pitch`` > 0 tilts the optical axis down toward the road, ``yaw`` > 0 turns
    it left, ``roll`` rotates about the optical axis.
    """
    R = rot_z(yaw) @ rot_y(pitch) @ CAMERA_AXES_IN_BODY @ rot_z(roll)
    return make_transform(R, position)


# --- polygons ---------------------------------------------------------------


def points_in_polygon(px: np.ndarray, py: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd crossing test for many points against one polygon.

    Half-open edge rule: a point exactly on a left/bottom edge counts as
    inside, on a right/top edge as outside.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    inside = np.zeros(np.broadcast(px, py).shape, dtype=bool)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if y1 == y2:
            continue
        straddles = (y1 > py) != (y2 > py)
        x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= straddles & (px < x_cross)
    return inside


def polygon_from_vertices(vertices: Sequence[Sequence[float]]) -> Polygon:
    return Polygon([(float(x), float(y)) for x, y in vertices])


def is_simple_polygon(vertices: Sequence[Sequence[float]]) -> bool:
    if len(vertices) < 3:
        return False
    poly = polygon_from_vertices(vertices)
    return bool(poly.is_valid and poly.area > 0.0 and poly.exterior.is_simple)


def polygon_centroid(vertices: Sequence[Sequence[float]]) -> tuple[float, float]:
    c = polygon_from_vertices(vertices).centroid
    return float(c.x), float(c.y)


def oriented_rectangle(
    x: float, y: float, theta: float, length: float, width: float
) -> np.ndarray:
    """Corners of a rectangle centred at (x, y) with its long axis along theta."""
    c, s = math.cos(theta), math.sin(theta)
    hl, hw = length / 2.0, width / 2.0
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])


def polygons_intersect(a: Sequence[Sequence[float]], b: Sequence[Sequence[float]]) -> bool:
    """Closed-set intersection: touching boundaries count."""
    return bool(polygon_from_vertices(a).intersects(polygon_from_vertices(b)))


class Corridor:
    """Road corridor: a polyline centreline swept by a constant width, flat end caps."""

    def __init__(self, centerline: Sequence[Sequence[float]], width: float):
        if len(centerline) < 2:
            raise ValueError("corridor centerline needs at least two points")
        if width <= 0:
            raise ValueError("corridor width must be positive")
        self.centerline = tuple((float(x), float(y)) for x, y in centerline)
        self.width = float(width)
        self._shape = LineString(self.centerline).buffer(
            self.width / 2.0, cap_style="flat", join_style="mitre"
        )

    def contains(self, x: float, y: float) -> bool:
        return bool(self._shape.covers(Point(x, y)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corridor):
            return NotImplemented
        return self.centerline == other.centerline and self.width == other.width

    def __hash__(self) -> int:
        return hash((self.centerline, self.width))

    def __repr__(self) -> str:
        return f"Corridor(centerline={self.centerline!r}, width={self.width!r})"
