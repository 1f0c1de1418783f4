"""Depth maps and their on-disk formats.

Primary format is 32-bit float PFM holding meters (grayscale "Pf", row-major
bottom-up per PFM convention, scale sign encoding endianness). 16-bit PNG
holding millimeters is accepted as a fallback, with 0 marking invalid depth.
In-memory, invalid depth is anything non-finite or <= 0 (stored as NaN).
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image


class DepthMap:
    """Per-pixel distances in meters; NaN (or any non-positive value) is invalid."""

    def __init__(self, depths):
        arr = np.asarray(depths, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"depth map must be 2-D and non-empty, got shape {arr.shape}")
        self.depths = arr

    @property
    def height(self) -> int:
        return self.depths.shape[0]

    @property
    def width(self) -> int:
        return self.depths.shape[1]

    @property
    def shape(self):
        return self.depths.shape

    def valid_mask(self) -> np.ndarray:
        return np.isfinite(self.depths) & (self.depths > 0)

    @classmethod
    def uniform(cls, depth: float, width: int, height: int) -> "DepthMap":
        return cls(np.full((height, width), float(depth)))


def write_pfm(path, data, scale: float = 1.0) -> None:
    """Write a 2-D float array as grayscale PFM (little-endian, bottom-up)."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("PFM writer expects a 2-D array")
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{arr.shape[1]} {arr.shape[0]}\n".encode("ascii"))
        f.write(f"{-abs(scale)}\n".encode("ascii"))
        f.write(np.flipud(arr).astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM file into a 2-D float array (top-down row order)."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise ValueError(f"not a PFM file: header {header!r}")
        if header == b"PF":
            raise ValueError("color PFM not supported for depth maps")
        dims = f.readline().decode("ascii")
        m = re.match(r"^\s*(\d+)\s+(\d+)\s*$", dims)
        if not m:
            raise ValueError(f"malformed PFM dimensions line: {dims!r}")
        width, height = int(m.group(1)), int(m.group(2))
        scale = float(f.readline().decode("ascii").strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(width * height * 4), dtype=dtype)
        if data.size != width * height:
            raise ValueError("PFM payload truncated")
        return np.flipud(data.reshape(height, width)).astype(np.float64)


def write_depth_pfm(path, depth_map: DepthMap) -> None:
    """Depth in meters as PFM; invalid pixels written as NaN."""
    data = np.where(depth_map.valid_mask(), depth_map.depths, np.nan)
    write_pfm(path, data)


def read_depth_pfm(path) -> DepthMap:
    return DepthMap(read_pfm(path))


def write_depth_png16(path, depth_map: DepthMap) -> None:
    """Depth as 16-bit PNG in millimeters; 0 marks invalid, values clip at 65535."""
    mm = np.where(depth_map.valid_mask(),
                  np.clip(np.round(depth_map.depths * 1000.0), 1, 65535), 0)
    Image.fromarray(mm.astype(np.uint16)).save(path)


def read_depth_png16(path) -> DepthMap:
    img = Image.open(path)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("16-bit depth PNG must be single-channel")
    depths = np.where(arr > 0, arr / 1000.0, np.nan)
    return DepthMap(depths)


def read_depth(path) -> DepthMap:
    """Dispatch on extension: .pfm primary, .png accepted as 16-bit mm fallback."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        return read_depth_pfm(path)
    if suffix == ".png":
        return read_depth_png16(path)
    raise ValueError(f"unsupported depth format {suffix!r}; expected .pfm or .png")
