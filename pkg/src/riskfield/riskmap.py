"""Per-hazard multi-factor cost maps and their pixel-wise max fusion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import RiskParams
from .imageio import risk_to_gray, risk_to_rgb, write_pgm, write_ppm

__all__ = [
    "RiskParams",
    "RiskMap",
    "area_score",
    "depth_score",
    "confidence_score",
    "hazard_scores",
    "hazard_cost",
    "hazard_cost_map",
    "fuse",
    "build_risk_map",
]


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def area_score(mask: np.ndarray, params: RiskParams) -> float:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError("mask must be a non-empty 2-D grid")
    ratio = np.count_nonzero(mask) / mask.size
    return _sigmoid(params.kappa_a * (ratio - params.eta_a))


def depth_score(depth_m: float, params: RiskParams) -> float:
    if depth_m < 0:
        raise ValueError("depth must be >= 0")
    return min(1.0, depth_m / params.d_ref)


def confidence_score(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"confidence {p} outside [0, 1]")
    return float(p)


def hazard_scores(det, params: RiskParams) -> tuple[float, float, float, float]:
    """(contextual, area, confidence, depth) sub-scores of one detection."""
    return (
        float(det.c_vlm),
        area_score(det.mask, params),
        confidence_score(det.confidence),
        depth_score(det.depth_m, params),
    )


def hazard_cost(det, params: RiskParams) -> float:
    """Scalar cost painted over the detection's mask, clamped to ``c_max``."""
    c_vlm, c_area, c_conf, c_depth = hazard_scores(det, params)
    total = (
        params.alpha_vlm * c_vlm
        + params.alpha_area * c_area
        + params.alpha_conf * c_conf
        + params.alpha_depth * c_depth
    )
    return min(params.c_max, total)


def hazard_cost_map(det, params: RiskParams) -> np.ndarray:
    mask = np.asarray(det.mask) != 0
    return np.where(mask, hazard_cost(det, params), 0.0)


@dataclass(frozen=True, eq=False)
class RiskMap:
    values: np.ndarray
    c_max: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("risk map must be 2-D")
        if v.size and (v.min() < 0.0 or v.max() > self.c_max):
            raise ValueError("risk values outside [0, c_max]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RiskMap):
            return NotImplemented
        return self.c_max == other.c_max and np.array_equal(self.values, other.values)

    __hash__ = None

    def to_gray(self) -> np.ndarray:
        return risk_to_gray(self.values, self.c_max)

    def to_rgb(self) -> np.ndarray:
        return risk_to_rgb(self.values, self.c_max)

    def write_pgm(self, path) -> None:
        write_pgm(path, self.to_gray())

    def write_ppm(self, path) -> None:
        write_ppm(path, self.to_rgb())


def fuse(
    maps: Sequence[np.ndarray], c_max: float, shape: tuple[int, int] | None = None
) -> RiskMap:
    """Pixel-wise maximum; an empty list yields zeros of ``shape``."""
    if not maps:
        if shape is None:
            raise ValueError("fusing an empty list needs an explicit shape")
        return RiskMap(np.zeros(shape), c_max)
    first = np.asarray(maps[0], dtype=float)
    for m in maps[1:]:
        if np.shape(m) != first.shape:
            raise ValueError(f"dimension mismatch: {np.shape(m)} vs {first.shape}")
    if shape is not None and first.shape != tuple(shape):
        raise ValueError(f"dimension mismatch: {first.shape} vs {tuple(shape)}")
    out = first.copy()
    for m in maps[1:]:
        np.maximum(out, m, out=out)
    return RiskMap(out, c_max)


def build_risk_map(
    detections: Iterable, params: RiskParams, shape: tuple[int, int]
) -> RiskMap:
    maps = [hazard_cost_map(d, params) for d in detections]
    return fuse(maps, params.c_max, shape)
