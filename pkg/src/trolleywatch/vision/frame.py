"""Frame container and binary PGM (P5) import/export.

PGM is the on-disk frame format: 8-bit, single channel, binary raster.
It is trivially diffable byte-for-byte, which the golden-file tests rely
on.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Frame:
    """Single-channel 8-bit luminance image plus capture metadata.

    ``pixels`` is a (height, width) uint8 array in row-major order.
    """

    pixels: np.ndarray
    timestamp: float = 0.0
    camera_id: str = ""

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2:
            raise ValueError(f"frame pixels must be 2-D, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValueError(f"frame pixels must be uint8, got {self.pixels.dtype}")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


def write_pgm(pixels: np.ndarray, path: str | os.PathLike) -> None:
    """Write a uint8 (H, W) array as a binary PGM (P5, maxval 255)."""
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("PGM export expects a 2-D uint8 array")
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(pixels).tobytes())


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a binary PGM (P5, maxval 255) into a uint8 (H, W) array."""
    with open(path, "rb") as fh:
        data = fh.read()
    # Header tokens may be separated by arbitrary whitespace and comments.
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4 and i < len(data):
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        tokens.append(data[start:i])
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    i += 1  # single whitespace byte after the header
    raster = data[i : i + w * h]
    if len(raster) != w * h:
        raise ValueError(f"{path}: truncated raster, expected {w * h} bytes")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()
