"""Binary PGM (P5) / PPM (P6) reading and writing, the risk colormap, mask RLE."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    pass


def encode_pgm(gray: np.ndarray) -> bytes:
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ValueError("PGM data must be (H, W)")
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + gray.astype(np.uint8).tobytes()


def encode_ppm(rgb: np.ndarray) -> bytes:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("PPM data must be (H, W, 3)")
    h, w = rgb.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.astype(np.uint8).tobytes()


def write_pgm(path, gray: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(gray))


def write_ppm(path, rgb: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(rgb))


def _read_header(data: bytes, n_fields: int) -> tuple[list[int], int]:
    fields: list[bytes] = []
    pos = 0
    while len(fields) < n_fields:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        fields.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    magic = fields[0].decode("ascii", "replace")
    try:
        values = [int(f) for f in fields[1:]]
    except ValueError:
        raise ImageFormatError("non-integer header field") from None
    return [magic, *values], pos


def decode_pgm(data: bytes) -> np.ndarray:
    (magic, w, h, maxval), pos = _read_header(data, 4)
    if magic != "P5":
        raise ImageFormatError(f"expected P5, got {magic}")
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    raster = data[pos : pos + w * h]
    if len(raster) != w * h:
        raise ImageFormatError("truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def decode_ppm(data: bytes) -> np.ndarray:
    (magic, w, h, maxval), pos = _read_header(data, 4)
    if magic != "P6":
        raise ImageFormatError(f"expected P6, got {magic}")
    if maxval != 255:
        raise ImageFormatError(f"unsupported maxval {maxval}")
    raster = data[pos : pos + w * h * 3]
    if len(raster) != w * h * 3:
        raise ImageFormatError("truncated raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy()


def read_pgm(path) -> np.ndarray:
    return decode_pgm(Path(path).read_bytes())


def read_ppm(path) -> np.ndarray:
    return decode_ppm(Path(path).read_bytes())


# --- masks ------------------------------------------------------------------


def mask_to_gray(mask: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(mask) != 0, 255, 0).astype(np.uint8)


def gray_to_mask(gray: np.ndarray) -> np.ndarray:
    """Any nonzero byte is foreground."""
    return (np.asarray(gray) != 0).astype(np.uint8)


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major run lengths, alternating 0-runs and 1-runs, starting with zeros."""
    flat = (np.asarray(mask).ravel() != 0).astype(np.int8)
    if flat.size == 0:
        return []
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs.insert(0, 0)
    return runs


def rle_decode(runs: list[int], height: int, width: int) -> np.ndarray:
    if any(r < 0 for r in runs):
        raise ValueError("negative run length")
    if sum(runs) != height * width:
        raise ValueError(f"run lengths cover {sum(runs)} pixels, expected {height * width}")
    values = np.arange(len(runs)) % 2
    flat = np.repeat(values.astype(np.uint8), runs)
    return flat.reshape(height, width)


# --- colormap ---------------------------------------------------------------

# (index, r, g, b) anchors; black -> blue -> cyan -> yellow -> red.
COLORMAP_ANCHORS = (
    (0, 0, 0, 0),
    (64, 0, 0, 255),
    (128, 0, 255, 255),
    (192, 255, 255, 0),
    (255, 255, 0, 0),
)


def _build_colormap() -> np.ndarray:
    table = np.zeros((256, 3), dtype=np.uint8)
    for (i0, *c0), (i1, *c1) in zip(COLORMAP_ANCHORS, COLORMAP_ANCHORS[1:]):
        span = i1 - i0
        for i in range(i0, i1 + 1):
            # integer interpolation, rounded half up
            table[i] = [(a * (i1 - i) + b * (i - i0) + span // 2) // span for a, b in zip(c0, c1)]
    return table


COLORMAP = _build_colormap()
COLORMAP.setflags(write=False)


def risk_to_gray(values: np.ndarray, c_max: float) -> np.ndarray:
    """Linear map [0, c_max] -> [0, 255], rounded half up."""
    scaled = np.clip(np.asarray(values, dtype=float) / c_max, 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def risk_to_rgb(values: np.ndarray, c_max: float) -> np.ndarray:
    return COLORMAP[risk_to_gray(values, c_max)]
