"""Pinhole projection, ground-plane rasterization of hazard footprints, trajectory projection.

Pixel centres sit at integer coordinates: column ``m`` and row ``n`` of the
image correspond to the ray through ``(m, n)``.  Continuous projections are
snapped to the nearest centre with ``floor(. + 0.5)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import points_in_polygon
from .scene import CameraModel, Hazard

MIN_DEPTH = 1e-6


@dataclass(frozen=True)
class PixelSample:
    m: float
    n: float
    valid: bool

    @property
    def col(self) -> int:
        return int(np.floor(self.m + 0.5))

    @property
    def row(self) -> int:
        return int(np.floor(self.n + 0.5))


def world_to_camera(p_w: Sequence[float], T_cw: np.ndarray) -> np.ndarray:
    p = np.asarray(p_w, dtype=float)
    return T_cw[:3, :3] @ p + T_cw[:3, 3]


def project_point(p_c: Sequence[float], camera: CameraModel) -> PixelSample:
    X, Y, Z = (float(v) for v in p_c)
    if Z <= MIN_DEPTH:
        return PixelSample(float("nan"), float("nan"), False)
    m = camera.fx * X / Z + camera.cx
    n = camera.fy * Y / Z + camera.cy
    valid = 0.0 <= m < camera.width and 0.0 <= n < camera.height
    return PixelSample(m, n, valid)


def project_points(points_c: np.ndarray, camera: CameraModel):
    """Vectorized projection of camera-frame points ``(..., 3)``.

    Returns ``(m, n, valid)`` arrays; ``m`` and ``n`` are NaN where the point
    is not in front of the camera.
    """
    X = points_c[..., 0]
    Y = points_c[..., 1]
    Z = points_c[..., 2]
    in_front = Z > MIN_DEPTH
    safe_Z = np.where(in_front, Z, 1.0)
    m = np.where(in_front, camera.fx * X / safe_Z + camera.cx, np.nan)
    n = np.where(in_front, camera.fy * Y / safe_Z + camera.cy, np.nan)
    with np.errstate(invalid="ignore"):
        valid = in_front & (m >= 0) & (m < camera.width) & (n >= 0) & (n < camera.height)
    return m, n, valid


def pixel_indices(m: np.ndarray, n: np.ndarray, camera: CameraModel):
    """Nearest pixel centre for valid projections, clipped into the grid."""
    cols = np.clip(np.floor(np.nan_to_num(m) + 0.5), 0, camera.width - 1).astype(np.intp)
    rows = np.clip(np.floor(np.nan_to_num(n) + 0.5), 0, camera.height - 1).astype(np.intp)
    return cols, rows


def ground_hits(camera: CameraModel, ground_z: float = 0.0, rows=None, cols=None):
    """Intersect pixel rays with the plane ``z = ground_z``.

    ``rows``/``cols`` are optional index ranges restricting the computation to
    a window; each pixel's arithmetic does not depend on the window.  Returns
    ``(gx, gy, hit)``; ``hit`` is False where the ray is parallel to or points
    away from the plane.
    """
    cols = np.arange(camera.width) if cols is None else cols
    rows = np.arange(camera.height) if rows is None else rows
    dx = (cols.astype(float) - camera.cx) / camera.fx
    dy = (rows.astype(float) - camera.cy) / camera.fy
    R_wc = camera.T_cw[:3, :3].T
    origin = -R_wc @ camera.T_cw[:3, 3]
    # world ray direction = R_wc @ (dx, dy, 1)
    dir_x = R_wc[0, 0] * dx[None, :] + R_wc[0, 1] * dy[:, None] + R_wc[0, 2]
    dir_y = R_wc[1, 0] * dx[None, :] + R_wc[1, 1] * dy[:, None] + R_wc[1, 2]
    dir_z = R_wc[2, 0] * dx[None, :] + R_wc[2, 1] * dy[:, None] + R_wc[2, 2]
    height = ground_z - origin[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = height / dir_z
    hit = np.isfinite(t) & (t > 0.0)
    t = np.where(hit, t, 0.0)
    return origin[0] + t * dir_x, origin[1] + t * dir_y, hit


def _clip_front(pc: np.ndarray) -> np.ndarray:
    """Clip a camera-frame polygon to the half-space ``Z > MIN_DEPTH`` (Sutherland-Hodgman)."""
    out = []
    n = len(pc)
    for i in range(n):
        cur, nxt = pc[i], pc[(i + 1) % n]
        cur_in, nxt_in = cur[2] > MIN_DEPTH, nxt[2] > MIN_DEPTH
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            s = (MIN_DEPTH - cur[2]) / (nxt[2] - cur[2])
            p = cur + s * (nxt - cur)
            # nudge onto the visible side so the projection stays finite
            p[2] = max(p[2], 2 * MIN_DEPTH)
            out.append(p)
    return np.array(out)


def _window(vertices: np.ndarray, camera: CameraModel):
    """Pixel window containing every pixel whose ground ray can land in the footprint.

    Returns ``(rows, cols)`` index ranges, or None when the footprint cannot
    appear in the image.
    """
    pts = np.column_stack([vertices, np.zeros(len(vertices))])
    pc = pts @ camera.T_cw[:3, :3].T + camera.T_cw[:3, 3]
    if np.any(pc[:, 2] <= MIN_DEPTH):
        pc = _clip_front(pc)
        if len(pc) == 0:
            return None
    m = camera.fx * pc[:, 0] / pc[:, 2] + camera.cx
    n = camera.fy * pc[:, 1] / pc[:, 2] + camera.cy
    c0 = max(np.floor(m.min()) - 1, 0)
    c1 = min(np.ceil(m.max()) + 1, camera.width - 1)
    r0 = max(np.floor(n.min()) - 1, 0)
    r1 = min(np.ceil(n.max()) + 1, camera.height - 1)
    if c0 > c1 or r0 > r1:
        return None
    return np.arange(int(r0), int(r1) + 1), np.arange(int(c0), int(c1) + 1)


def rasterize_polygon(vertices: np.ndarray, camera: CameraModel) -> np.ndarray:
    mask = np.zeros(camera.shape, dtype=bool)
    window = _window(vertices, camera)
    if window is None:
        return mask
    rows, cols = window
    gx, gy, hit = ground_hits(camera, rows=rows, cols=cols)
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    cand = hit & (gx >= lo[0]) & (gx <= hi[0]) & (gy >= lo[1]) & (gy <= hi[1])
    if cand.any():
        sub = np.zeros(cand.shape, dtype=bool)
        sub[cand] = points_in_polygon(gx[cand], gy[cand], vertices)
        mask[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1] = sub
    return mask


def rasterize_footprint(hazard: Hazard, camera: CameraModel) -> np.ndarray:
    """Binary ``(H, W)`` mask (uint8 0/1) of pixels whose ground ray lands inside the footprint."""
    return rasterize_polygon(hazard.vertices, camera).astype(np.uint8)


def project_ground_points(xy: np.ndarray, camera: CameraModel, ground_offset: float = 0.0):
    """Project planar world points ``(..., 2)`` lifted to ``z = ground_offset``."""
    xy = np.asarray(xy, dtype=float)
    R = camera.T_cw[:3, :3]
    t = camera.T_cw[:3, 3]
    x = xy[..., 0]
    y = xy[..., 1]
    pc = np.stack(
        [
            R[0, 0] * x + R[0, 1] * y + R[0, 2] * ground_offset + t[0],
            R[1, 0] * x + R[1, 1] * y + R[1, 2] * ground_offset + t[1],
            R[2, 0] * x + R[2, 1] * y + R[2, 2] * ground_offset + t[2],
        ],
        axis=-1,
    )
    return project_points(pc, camera)


def project_trajectory(traj, camera: CameraModel, ground_offset: float = 0.0) -> list[PixelSample]:
    xy = traj.positions
    if len(xy) == 0:
        raise ValueError("trajectory is empty")
    m, n, valid = project_ground_points(xy, camera, ground_offset)
    return [PixelSample(float(a), float(b), bool(v)) for a, b, v in zip(m, n, valid)]
