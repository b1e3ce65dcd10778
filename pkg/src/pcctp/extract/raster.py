"""Water-probability rasters, the PWM1 text format and pixel classification.

Cells are addressed ``(row, col)`` with row 0 the top row. Planar metric
coordinates put a cell centre at ``((col + 0.5) * res, (row + 0.5) * res)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

LAND = 0
STOCHASTIC = 1
DETERMINISTIC = 2

MAGIC = "PWM1"


class RasterFormatError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass(frozen=True, eq=False)
class WaterMaskRaster:
    probs: np.ndarray  # (height, width) water probabilities
    resolution: float  # metres per cell

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or probs.size == 0:
            raise RasterFormatError("raster must be a non-empty 2-D grid")
        if not np.all((probs >= 0.0) & (probs <= 1.0)):
            raise RasterFormatError("probabilities must lie in [0, 1]")
        if not self.resolution > 0:
            raise RasterFormatError("resolution must be positive")
        object.__setattr__(self, "probs", probs)

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return int(np.floor(y / self.resolution)), int(np.floor(x / self.resolution))

    def centre(self, cell) -> tuple[float, float]:
        r, c = cell
        return ((c + 0.5) * self.resolution, (r + 0.5) * self.resolution)


def parse_raster(text: str) -> WaterMaskRaster:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise RasterFormatError(f"expected magic {MAGIC!r}", 1)
    if len(lines) < 2:
        raise RasterFormatError("missing header", 2)
    header = lines[1].split()
    try:
        width, height, res = int(header[0]), int(header[1]), float(header[2])
        if len(header) != 3:
            raise ValueError
    except (ValueError, IndexError):
        raise RasterFormatError("header must be '<width> <height> <resolution_m>'", 2) from None
    if width <= 0 or height <= 0 or not res > 0:
        raise RasterFormatError("width, height and resolution must be positive", 2)
    rows = lines[2:]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise RasterFormatError(f"expected {height} rows, found {len(rows)}", 2 + len(rows))
    probs = np.empty((height, width))
    for r, line in enumerate(rows):
        lineno = r + 3
        fields = line.split()
        if len(fields) != width:
            raise RasterFormatError(f"expected {width} values, found {len(fields)}", lineno)
        try:
            probs[r] = [float(v) for v in fields]
        except ValueError:
            raise RasterFormatError("non-numeric probability", lineno) from None
        if not np.all((probs[r] >= 0.0) & (probs[r] <= 1.0)):
            raise RasterFormatError("probability outside [0, 1]", lineno)
    return WaterMaskRaster(probs, res)


def read_raster(path) -> WaterMaskRaster:
    return parse_raster(Path(path).read_text())


def format_raster(raster: WaterMaskRaster) -> str:
    out = [MAGIC, f"{raster.width} {raster.height} {raster.resolution!r}"]
    out.extend(" ".join(repr(float(v)) for v in row) for row in raster.probs)
    return "\n".join(out) + "\n"


@dataclass(frozen=True, eq=False)
class PixelGrid:
    labels: np.ndarray    # LAND / STOCHASTIC / DETERMINISTIC per cell
    boundary: np.ndarray  # deterministic cells touching a non-deterministic cell or the rim

    def passable(self, label) -> np.ndarray:
        return self.labels == label


def classify_pixels(raster: WaterMaskRaster, det_threshold: float = 0.9,
                    stoch_threshold: float = 0.5) -> PixelGrid:
    """Threshold water probabilities (both thresholds inclusive) and mark boundary cells."""
    if not 0.0 < stoch_threshold < det_threshold < 1.0:
        raise ValueError("need 0 < stoch_threshold < det_threshold < 1")
    p = raster.probs
    labels = np.full(p.shape, LAND, dtype=np.int8)
    labels[p >= stoch_threshold] = STOCHASTIC
    labels[p >= det_threshold] = DETERMINISTIC
    det = labels == DETERMINISTIC
    # cells outside the raster count as non-water
    padded = np.pad(det, 1, constant_values=False)
    interior = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
    return PixelGrid(labels, det & ~interior)
