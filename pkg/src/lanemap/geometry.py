"""Planar frames and tile geometry.

Conventions used everywhere in this package:

- Global coordinates are planar meters, x east, y north.
- Headings are radians counterclockwise from +x.
- Image pixels are (u, v) with u the column (right) and v the row (down);
  pixel (u, v) names the lattice point offset (u - w/2, -(v - h/2)) from the
  tile center, scaled by the meter-per-pixel size and rotated by the tile
  heading.

A tile is a square ground patch centered on a road point and rotated to the
road heading, so with the defaults (256 px at 0.25 m/px) it covers 64 m x 64 m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputDomainError, OutOfTileError


@dataclass(frozen=True, slots=True)
class GlobalPoint:
    """A point in the planar global frame, meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InputDomainError(f"non-finite coordinates ({self.x}, {self.y})")


@dataclass(frozen=True, slots=True)
class PixelCoord:
    """Integer image coordinates, u = column, v = row."""

    u: int
    v: int


@dataclass(frozen=True, slots=True)
class TileSpec:
    """A square image tile anchored in the global frame."""

    center: GlobalPoint
    heading: float
    pixel_size: float = 0.25
    width: int = 256
    height: int = 256

    def __post_init__(self):
        if not math.isfinite(self.heading):
            raise InputDomainError("tile heading must be finite")
        if self.pixel_size <= 0:
            raise InputDomainError(f"pixel_size must be positive, got {self.pixel_size}")
        if self.width <= 0 or self.height <= 0:
            raise InputDomainError(f"tile dimensions must be positive, got {self.width}x{self.height}")

    @property
    def extent(self) -> tuple[float, float]:
        """Footprint size in meters, (width, height)."""
        return (self.width * self.pixel_size, self.height * self.pixel_size)


def pixel_to_global(pix: PixelCoord, tile: TileSpec) -> GlobalPoint:
    """Map an integer pixel to its global position.

    The pixel offset from the image center is scaled to meters and rotated by
    the tile heading about the tile center.  Distances are preserved up to the
    fixed scale, so the map is an isometry of the pixel lattice.
    """
    if not (0 <= pix.u < tile.width) or not (0 <= pix.v < tile.height):
        raise InputDomainError(f"pixel ({pix.u}, {pix.v}) outside {tile.width}x{tile.height} image")
    p = tile.pixel_size
    dx = (pix.u - tile.width / 2.0) * p
    dy = -(pix.v - tile.height / 2.0) * p
    c = math.cos(tile.heading)
    s = math.sin(tile.heading)
    return GlobalPoint(tile.center.x + c * dx - s * dy, tile.center.y + s * dx + c * dy)


def global_to_pixel(pt: GlobalPoint, tile: TileSpec) -> PixelCoord:
    """Map a global point to the nearest pixel of the tile.

    Raises OutOfTileError when the point does not land inside the image
    bounds.  Rounding to the nearest lattice point bounds the round-trip error
    by half a pixel diagonal (0.5 * pixel_size * sqrt(2)).
    """
    uf, vf = global_to_pixel_float(pt, tile)
    u = math.floor(uf + 0.5)
    v = math.floor(vf + 0.5)
    if not (0 <= u < tile.width) or not (0 <= v < tile.height):
        raise OutOfTileError(
            f"point ({pt.x:.3f}, {pt.y:.3f}) maps to pixel ({u}, {v}) outside "
            f"{tile.width}x{tile.height} tile at ({tile.center.x:.3f}, {tile.center.y:.3f})"
        )
    return PixelCoord(u, v)


def global_to_pixel_float(pt: GlobalPoint, tile: TileSpec) -> tuple[float, float]:
    """Continuous (u, v) image coordinates of a global point, no bounds check."""
    p = tile.pixel_size
    dx = pt.x - tile.center.x
    dy = pt.y - tile.center.y
    c = math.cos(tile.heading)
    s = math.sin(tile.heading)
    du = (c * dx + s * dy) / p
    dv = (-s * dx + c * dy) / p
    return (tile.width / 2.0 + du, tile.height / 2.0 - dv)


def pixel_array_to_global(us: np.ndarray, vs: np.ndarray, tile: TileSpec) -> np.ndarray:
    """Vectorized pixel_to_global for index arrays; returns an (n, 2) array."""
    p = tile.pixel_size
    dx = (np.asarray(us, dtype=float) - tile.width / 2.0) * p
    dy = -(np.asarray(vs, dtype=float) - tile.height / 2.0) * p
    c = math.cos(tile.heading)
    s = math.sin(tile.heading)
    out = np.empty((len(dx), 2))
    out[:, 0] = tile.center.x + c * dx - s * dy
    out[:, 1] = tile.center.y + s * dx + c * dy
    return out


def global_array_to_pixel_float(pts: np.ndarray, tile: TileSpec) -> np.ndarray:
    """Vectorized global_to_pixel_float for an (n, 2) array; returns (n, 2) floats (u, v)."""
    pts = np.asarray(pts, dtype=float)
    p = tile.pixel_size
    dx = pts[:, 0] - tile.center.x
    dy = pts[:, 1] - tile.center.y
    c = math.cos(tile.heading)
    s = math.sin(tile.heading)
    out = np.empty_like(pts)
    out[:, 0] = tile.width / 2.0 + (c * dx + s * dy) / p
    out[:, 1] = tile.height / 2.0 - (-s * dx + c * dy) / p
    return out


def in_tile_footprint(pt: GlobalPoint, tile: TileSpec) -> bool:
    """Whether a global point lies inside the rotated square footprint of the tile."""
    p = tile.pixel_size
    dx = pt.x - tile.center.x
    dy = pt.y - tile.center.y
    c = math.cos(tile.heading)
    s = math.sin(tile.heading)
    du = c * dx + s * dy
    dv = -s * dx + c * dy
    return abs(du) <= tile.width * p / 2.0 and abs(dv) <= tile.height * p / 2.0


def tile_footprint_corners(tile: TileSpec) -> np.ndarray:
    """The four footprint corners as a (4, 2) array, counterclockwise."""
    hw = tile.width * tile.pixel_size / 2.0
    hh = tile.height * tile.pixel_size / 2.0
    corners = np.array([[hw, hh], [-hw, hh], [-hw, -hh], [hw, -hh]])
    c = math.cos(tile.heading)
    s = math.sin(tile.heading)
    rot = np.array([[c, -s], [s, c]])
    return corners @ rot.T + np.array([tile.center.x, tile.center.y])
