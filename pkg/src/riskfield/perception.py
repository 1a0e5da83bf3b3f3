"""Hazard detections from oracle, noisy and external (file-protocol) providers.

External provider protocol
--------------------------
The caller writes into a work directory:

* ``request.json`` -- ``{"protocol", "frame", "prompt", "state", "camera": "camera.json",
  "scene": "scene.json" | null}``
* ``camera.json``  -- intrinsics, image size and the 4x4 ``T_cw``
* ``scene.json``   -- scenario name and hazard geometry (omitted when geometry is withheld)

then runs ``<endpoint argv...> <workdir>``.  The provider answers with
``response.json``::

    {"protocol": "riskfield.perception/1", "width": W, "height": H,
     "score_scale": 1.0,
     "detections": [{"hazard_id", "label", "c_vlm", "confidence", "depth_m",
                     "mask": "mask_<id>.pgm" | {"rle": [runs...]}}]}

PGM masks are binary P5, maxval 255, foreground = any nonzero byte.  RLE runs
are row-major and alternate background/foreground starting with background.
``score_scale`` divides ``c_vlm`` (10 for a 0-10 rating scale).
"""

from __future__ import annotations

import dataclasses
import json
import re
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import ndimage

from .config import DEFAULT_PROMPT, NoiseParams
from .imageio import (
    ImageFormatError,
    gray_to_mask,
    mask_to_gray,
    read_pgm,
    rle_decode,
    rle_encode,
    write_pgm,
)
from .projection import rasterize_footprint
from .scene import CameraModel, Hazard, MotorcycleState

PROTOCOL = "riskfield.perception/1"

__all__ = [
    "HazardDetection",
    "NoiseParams",
    "PerceptionRequest",
    "PerceptionResponse",
    "PerceptionError",
    "ProtocolError",
    "DetectionValidationError",
    "DimensionMismatchError",
    "ProviderTimeout",
    "oracle_perceive",
    "noisy_perceive",
    "external_perceive",
]


class PerceptionError(Exception):
    pass


class ProtocolError(PerceptionError):
    pass


class DetectionValidationError(PerceptionError):
    pass


class DimensionMismatchError(DetectionValidationError):
    pass


class ProviderTimeout(PerceptionError):
    pass


@dataclass(frozen=True, eq=False)
class HazardDetection:
    hazard_id: str
    label: str
    c_vlm: float
    confidence: float
    mask: np.ndarray
    depth_m: float = 0.0

    def __post_init__(self):
        for name in ("c_vlm", "confidence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DetectionValidationError(
                    f"detection {self.hazard_id!r}: {name} {value} outside [0, 1]"
                )
        if not self.depth_m >= 0:
            raise DetectionValidationError(f"detection {self.hazard_id!r}: depth_m must be >= 0")
        mask = (np.asarray(self.mask) != 0).astype(np.uint8)
        if mask.ndim != 2:
            raise DetectionValidationError(f"detection {self.hazard_id!r}: mask must be 2-D")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    def semantics(self) -> tuple[str, float, float, float]:
        return (self.label, self.c_vlm, self.confidence, self.depth_m)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HazardDetection):
            return NotImplemented
        return (
            self.hazard_id == other.hazard_id
            and self.semantics() == other.semantics()
            and np.array_equal(self.mask, other.mask)
        )

    __hash__ = None


def _check_unique(dets: Sequence[HazardDetection]) -> None:
    seen = set()
    for d in dets:
        if d.hazard_id in seen:
            raise DetectionValidationError(f"duplicate hazard_id {d.hazard_id!r}")
        seen.add(d.hazard_id)


def oracle_perceive(scenario, camera: CameraModel, state: MotorcycleState | None = None):
    """Ground-truth detections for every hazard visible from ``camera``.

    ``scenario`` only needs a ``hazards`` attribute.  ``state`` is accepted for
    interface parity; neither speed nor lean angle changes the oracle's scores.
    """
    out = []
    for h in scenario.hazards:
        mask = rasterize_footprint(h, camera)
        if not mask.any():
            continue
        out.append(
            HazardDetection(
                hazard_id=h.id,
                label=h.label,
                c_vlm=h.base_context_score,
                confidence=1.0,
                mask=mask,
                depth_m=h.depth_m,
            )
        )
    return out


def _morph(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilate (radius > 0) or erode (radius < 0) with a square structuring element."""
    if radius == 0 or not mask.any():
        return mask
    k = abs(radius)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    # operate on a padded crop around the foreground; pixels outside stay background
    r0, r1 = max(rows[0] - 2 * k, 0), min(rows[-1] + 2 * k + 1, mask.shape[0])
    c0, c1 = max(cols[0] - 2 * k, 0), min(cols[-1] + 2 * k + 1, mask.shape[1])
    crop = mask[r0:r1, c0:c1] != 0
    structure = np.ones((2 * k + 1,) * 2, dtype=bool)
    if radius > 0:
        crop = ndimage.binary_dilation(crop, structure=structure)
    else:
        crop = ndimage.binary_erosion(crop, structure=structure, border_value=0)
    out = np.zeros_like(mask, dtype=np.uint8)
    out[r0:r1, c0:c1] = crop
    return out


def noisy_perceive(
    scenario, camera: CameraModel, state: MotorcycleState | None, noise: NoiseParams, seed: int
):
    """Oracle detections with seeded score noise, dropout and mask erosion/dilation.

    Draws are made per hazard in scenario order whether or not the hazard is
    visible, so a given seed perturbs each hazard identically on every frame.
    """
    rng = np.random.default_rng(seed)
    out = []
    r = noise.mask_radius
    for h in scenario.hazards:
        u = rng.random()
        z_vlm, z_conf = rng.standard_normal(2)
        radius = int(rng.integers(-r, r + 1))
        if u < noise.dropout:
            continue
        mask = _morph(rasterize_footprint(h, camera), radius)
        if not mask.any():
            continue
        c_vlm = min(1.0, max(0.0, h.base_context_score + noise.c_vlm_std * z_vlm))
        conf = min(1.0, max(0.0, 1.0 + noise.confidence_std * z_conf))
        out.append(
            HazardDetection(
                hazard_id=h.id,
                label=h.label,
                c_vlm=c_vlm,
                confidence=conf,
                mask=mask,
                depth_m=h.depth_m,
            )
        )
    return out


# --- external protocol ------------------------------------------------------


@dataclass(frozen=True)
class PerceptionRequest:
    state: MotorcycleState
    camera: CameraModel
    prompt: str = DEFAULT_PROMPT
    frame: int = 0
    scenario_name: str = ""
    hazards: tuple[Hazard, ...] | None = None

    def write(self, workdir) -> Path:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        (workdir / "camera.json").write_text(json.dumps(self.camera.to_dict(), indent=1))
        scene_ref = None
        if self.hazards is not None:
            scene = {"name": self.scenario_name, "hazards": [h.to_dict() for h in self.hazards]}
            (workdir / "scene.json").write_text(json.dumps(scene, indent=1))
            scene_ref = "scene.json"
        request = {
            "protocol": PROTOCOL,
            "frame": self.frame,
            "prompt": self.prompt,
            "state": self.state.to_dict(),
            "camera": "camera.json",
            "scene": scene_ref,
        }
        path = workdir / "request.json"
        path.write_text(json.dumps(request, indent=1))
        return path

    @classmethod
    def read(cls, workdir) -> "PerceptionRequest":
        workdir = Path(workdir)
        try:
            req = json.loads((workdir / "request.json").read_text())
            camera = CameraModel.from_dict(json.loads((workdir / req["camera"]).read_text()))
            hazards = None
            name = ""
            if req.get("scene"):
                scene = json.loads((workdir / req["scene"]).read_text())
                name = scene.get("name", "")
                hazards = tuple(
                    Hazard(
                        id=h["id"],
                        label=h["label"],
                        footprint=h["footprint"],
                        depth_m=h["depth_m"],
                        base_context_score=h["base_context_score"],
                    )
                    for h in scene["hazards"]
                )
            return cls(
                state=MotorcycleState(**req["state"]),
                camera=camera,
                prompt=req.get("prompt", ""),
                frame=int(req.get("frame", 0)),
                scenario_name=name,
                hazards=hazards,
            )
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed request in {workdir}: {exc}") from None


@dataclass(frozen=True)
class PerceptionResponse:
    width: int
    height: int
    detections: tuple[HazardDetection, ...]

    def write(self, workdir, mask_format: str = "pgm") -> Path:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        items = []
        for det in self.detections:
            if mask_format == "pgm":
                fname = f"mask_{safe_name(det.hazard_id)}.pgm"
                write_pgm(workdir / fname, mask_to_gray(det.mask))
                mask_ref: Any = fname
            else:
                mask_ref = {"rle": rle_encode(det.mask)}
            items.append(
                {
                    "hazard_id": det.hazard_id,
                    "label": det.label,
                    "c_vlm": det.c_vlm,
                    "confidence": det.confidence,
                    "depth_m": det.depth_m,
                    "mask": mask_ref,
                }
            )
        doc = {
            "protocol": PROTOCOL,
            "width": self.width,
            "height": self.height,
            "score_scale": 1.0,
            "detections": items,
        }
        path = workdir / "response.json"
        path.write_text(json.dumps(doc, indent=1))
        return path


def safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", text)


def _number(item: dict, key: str, det_id: str) -> float:
    if key not in item:
        raise ProtocolError(f"detection {det_id!r}: missing field {key!r}")
    value = item[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"detection {det_id!r}: field {key!r} is not a number")
    return float(value)


def read_response(path, expected_shape: tuple[int, int] | None = None) -> PerceptionResponse:
    """Parse and validate ``response.json`` (or a directory holding it)."""
    path = Path(path)
    if path.is_dir():
        path = path / "response.json"
    if not path.exists():
        raise ProtocolError(f"response file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"{path}: malformed JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("detections"), list):
        raise ProtocolError(f"{path}: response must be an object with a 'detections' list")
    try:
        width, height = int(doc["width"]), int(doc["height"])
    except (KeyError, TypeError, ValueError):
        raise ProtocolError(f"{path}: response needs integer 'width' and 'height'") from None
    if expected_shape is not None and (height, width) != tuple(expected_shape):
        raise DimensionMismatchError(
            f"response image size {width}x{height} does not match camera "
            f"{expected_shape[1]}x{expected_shape[0]}"
        )
    scale = doc.get("score_scale", 1.0)
    if isinstance(scale, bool) or not isinstance(scale, (int, float)) or scale <= 0:
        raise ProtocolError(f"{path}: score_scale must be a positive number")
    dets = []
    for i, item in enumerate(doc["detections"]):
        if not isinstance(item, dict):
            raise ProtocolError(f"detection #{i} is not an object")
        det_id = str(item.get("hazard_id", f"#{i}"))
        if "hazard_id" not in item or "label" not in item:
            raise ProtocolError(f"detection {det_id!r}: needs 'hazard_id' and 'label'")
        mask_ref = item.get("mask")
        if isinstance(mask_ref, str):
            mask_path = path.parent / mask_ref
            if not mask_path.exists():
                raise ProtocolError(f"detection {det_id!r}: mask file missing: {mask_ref}")
            try:
                mask = gray_to_mask(read_pgm(mask_path))
            except ImageFormatError as exc:
                raise ProtocolError(f"detection {det_id!r}: bad mask {mask_ref}: {exc}") from None
        elif isinstance(mask_ref, dict) and "rle" in mask_ref:
            try:
                mask = rle_decode(list(mask_ref["rle"]), height, width)
            except (TypeError, ValueError) as exc:
                raise DimensionMismatchError(f"detection {det_id!r}: bad RLE mask: {exc}") from None
        else:
            raise ProtocolError(f"detection {det_id!r}: 'mask' must be a PGM file name or RLE")
        if mask.shape != (height, width):
            raise DimensionMismatchError(
                f"detection {det_id!r}: mask is {mask.shape[1]}x{mask.shape[0]}, "
                f"expected {width}x{height}"
            )
        dets.append(
            HazardDetection(
                hazard_id=det_id,
                label=str(item["label"]),
                c_vlm=_number(item, "c_vlm", det_id) / scale,
                confidence=_number(item, "confidence", det_id),
                mask=mask,
                depth_m=_number(item, "depth_m", det_id) if "depth_m" in item else 0.0,
            )
        )
    _check_unique(dets)
    return PerceptionResponse(width, height, tuple(dets))


def external_perceive(
    request: PerceptionRequest,
    endpoint: Sequence[str] | str,
    timeout: float = 60.0,
    workdir=None,
) -> list[HazardDetection]:
    """Run an external provider process over the file protocol.

    ``endpoint`` is an argv list (or a shell-style string); the work directory
    is appended as the last argument.
    """
    import shlex

    argv = shlex.split(endpoint) if isinstance(endpoint, str) else list(endpoint)
    if not argv:
        raise ProtocolError("empty provider endpoint")
    with tempfile.TemporaryDirectory(prefix="riskfield-perception-") as tmp:
        wd = Path(workdir) if workdir is not None else Path(tmp)
        request.write(wd)
        stale = wd / "response.json"
        if stale.exists():
            stale.unlink()
        try:
            proc = subprocess.run(
                [*argv, str(wd)], capture_output=True, text=True, timeout=timeout
            )
        except subprocess.TimeoutExpired:
            raise ProviderTimeout(f"provider did not answer within {timeout} s") from None
        except OSError as exc:
            raise ProtocolError(f"cannot start provider {argv[0]!r}: {exc}") from None
        if proc.returncode != 0:
            raise ProtocolError(
                f"provider exited with status {proc.returncode}: {proc.stderr.strip()[-500:]}"
            )
        response = read_response(wd / "response.json", request.camera.shape)
    return list(response.detections)


# --- providers used by the simulator -----------------------------------------


class OracleProvider:
    name = "oracle"

    def perceive(self, scenario, camera, state, frame=0):
        return oracle_perceive(scenario, camera, state)


class NoisyProvider:
    name = "noisy"

    def __init__(self, noise: NoiseParams, seed: int):
        self.noise = noise
        self.seed = int(seed)

    def perceive(self, scenario, camera, state, frame=0):
        return noisy_perceive(scenario, camera, state, self.noise, self.seed)


class ExternalProvider:
    name = "external"

    def __init__(self, endpoint, timeout: float = 60.0, share_geometry: bool = True):
        self.endpoint = endpoint
        self.timeout = timeout
        self.share_geometry = share_geometry

    def perceive(self, scenario, camera, state, frame=0):
        request = PerceptionRequest(
            state=state,
            camera=camera,
            prompt=scenario.sim_params.prompt,
            frame=frame,
            scenario_name=scenario.name,
            hazards=tuple(scenario.hazards) if self.share_geometry else None,
        )
        return external_perceive(request, self.endpoint, self.timeout)


class SemanticLatch:
    """Freezes each hazard's label and scores at first sighting for the episode.

    Masks still follow the current view; only the semantic attributes are held.
    """

    def __init__(self):
        self._seen: dict[str, tuple[str, float, float, float]] = {}

    def apply(self, detections: Sequence[HazardDetection]) -> list[HazardDetection]:
        out = []
        for det in detections:
            sem = self._seen.setdefault(det.hazard_id, det.semantics())
            if sem != det.semantics():
                label, c_vlm, conf, depth = sem
                det = dataclasses.replace(
                    det, label=label, c_vlm=c_vlm, confidence=conf, depth_m=depth
                )
            out.append(det)
        return out
