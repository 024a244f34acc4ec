"""Lane raster images: channel conventions, extraction, synthetic rendering, corruption.

A lane image has three channel planes in [0, 1], one per lane class
(0 = broken white, 1 = solid white, 2 = yellow).  A pixel carries a lane when
its strongest channel reaches the 0.5 threshold; ties go to the lowest
channel index.  The on-disk interchange form is an 8-bit RGB PNG plus a
manifest with one line per tile: ``tile_id x y heading p w h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputDomainError
from .geometry import (
    GlobalPoint,
    PixelCoord,
    TileSpec,
    global_array_to_pixel_float,
    pixel_array_to_global,
)

THRESHOLD = 0.5


class LaneClass(IntEnum):
    BROKEN_WHITE = 0
    WHITE = 1
    YELLOW = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "LaneClass":
        try:
            return cls[label.upper()]
        except KeyError:
            raise InputDomainError(f"unknown lane class {label!r}") from None


@dataclass(frozen=True, slots=True)
class LanePoint:
    """A lane evidence point in the global frame with its pixel provenance."""

    position: GlobalPoint
    lane_class: LaneClass
    source: tuple[str, int, int]  # (tile_id, u, v)


@dataclass(slots=True)
class LaneImage:
    tile_id: str
    tile: TileSpec
    channels: np.ndarray  # (3, height, width) float32 in [0, 1]

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float32)
        if ch.shape != (3, self.tile.height, self.tile.width):
            raise InputDomainError(
                f"channel shape {ch.shape} does not match tile {self.tile.height}x{self.tile.width}"
            )
        if ch.size and (float(ch.min()) < 0.0 or float(ch.max()) > 1.0):
            raise InputDomainError("channel intensities must lie in [0, 1]")
        self.channels = ch


@dataclass(frozen=True, slots=True)
class CorruptionParams:
    """Synthetic degradation: dropout, pixel jitter, box blur.  Fully seeded."""

    dropout: float = 0.0
    jitter_sigma: float = 0.0
    blur_radius: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout <= 1.0:
            raise InputDomainError(f"dropout must be in [0, 1], got {self.dropout}")
        if self.jitter_sigma < 0.0:
            raise InputDomainError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        if self.blur_radius < 0:
            raise InputDomainError(f"blur_radius must be >= 0, got {self.blur_radius}")


def binarize_channels(channels: np.ndarray, threshold: float = THRESHOLD) -> np.ndarray:
    """Boolean (3, h, w) class presence planes under the shared one-class-per-pixel rule."""
    ch = np.asarray(channels)
    if ch.ndim != 3 or ch.shape[0] != 3:
        raise InputDomainError(f"expected (3, h, w) channels, got {ch.shape}")
    selected = np.argmax(ch, axis=0)  # ties resolve to the lowest channel index
    lit = np.max(ch, axis=0) >= threshold
    planes = np.zeros(ch.shape, dtype=bool)
    for k in range(3):
        planes[k] = lit & (selected == k)
    return planes


def extract_lane_pixels(img: LaneImage, threshold: float = THRESHOLD) -> list[tuple[PixelCoord, LaneClass]]:
    """Lit pixels with their winning class, in row-major (v, u) order."""
    planes = binarize_channels(img.channels, threshold)
    sel = np.argmax(img.channels, axis=0)
    lit = planes.any(axis=0)
    vs, us = np.nonzero(lit)
    return [(PixelCoord(int(u), int(v)), LaneClass(int(sel[v, u]))) for v, u in zip(vs, us)]


def lane_points_from_image(img: LaneImage, threshold: float = THRESHOLD) -> list[LanePoint]:
    """Convert lit pixels to global-frame lane points with provenance."""
    planes = binarize_channels(img.channels, threshold)
    sel = np.argmax(img.channels, axis=0)
    lit = planes.any(axis=0)
    vs, us = np.nonzero(lit)
    if len(vs) == 0:
        return []
    positions = pixel_array_to_global(us, vs, img.tile)
    out = []
    for (x, y), u, v in zip(positions, us, vs):
        out.append(
            LanePoint(
                position=GlobalPoint(float(x), float(y)),
                lane_class=LaneClass(int(sel[v, u])),
                source=(img.tile_id, int(u), int(v)),
            )
        )
    return out


def _dilate(mask: np.ndarray, width: int) -> np.ndarray:
    """Dilate a boolean mask with a square footprint of side ``width``."""
    lo = -((width - 1) // 2)
    hi = width // 2
    out = np.zeros_like(mask)
    h, w = mask.shape
    for dv in range(lo, hi + 1):
        for du in range(lo, hi + 1):
            src_v = slice(max(0, -dv), min(h, h - dv))
            dst_v = slice(max(0, dv), min(h, h + dv))
            src_u = slice(max(0, -du), min(w, w - du))
            dst_u = slice(max(0, du), min(w, w + du))
            out[dst_v, dst_u] |= mask[src_v, src_u]
    return out


def render_synthetic_tile(lanes, tile: TileSpec, tile_id: str = "", stroke_width: int = 1) -> LaneImage:
    """Rasterize ground-truth lane polylines into a clean lane image.

    ``lanes`` is any iterable of objects with ``polyline`` (GlobalPoint
    sequence) and ``lane_class`` attributes.  Each polyline is clipped to the
    tile and drawn as a ``stroke_width``-pixel stroke with intensity 1.0.
    """
    if stroke_width < 1:
        raise InputDomainError(f"stroke_width must be >= 1, got {stroke_width}")
    h, w = tile.height, tile.width
    channels = np.zeros((3, h, w), dtype=np.float32)
    masks = [np.zeros((h, w), dtype=bool) for _ in range(3)]
    margin = stroke_width + 1.0
    for lane in lanes:
        pts = np.array([[p.x, p.y] for p in lane.polyline])
        px = global_array_to_pixel_float(pts, tile)
        # Quantize so equal world-frame offsets rasterize identically after translation.
        px = np.round(px, 6)
        mask = masks[int(lane.lane_class)]
        for (ua, va), (ub, vb) in zip(px[:-1], px[1:]):
            if max(ua, ub) < -margin or min(ua, ub) > w - 1 + margin:
                continue
            if max(va, vb) < -margin or min(va, vb) > h - 1 + margin:
                continue
            length = math.hypot(ub - ua, vb - va)
            n = max(2, int(math.ceil(length / 0.4)) + 1)
            ts = np.linspace(0.0, 1.0, n)
            us = np.floor(ua + ts * (ub - ua) + 0.5).astype(np.int64)
            vs = np.floor(va + ts * (vb - va) + 0.5).astype(np.int64)
            keep = (us >= 0) & (us < w) & (vs >= 0) & (vs < h)
            mask[vs[keep], us[keep]] = True
    for k in range(3):
        if stroke_width > 1:
            masks[k] = _dilate(masks[k], stroke_width)
        channels[k][masks[k]] = 1.0
    return LaneImage(tile_id=tile_id, tile=tile, channels=channels)


def _box_blur(channels: np.ndarray, radius: int) -> np.ndarray:
    size = 2 * radius + 1

    def blur_axis(x: np.ndarray, axis: int) -> np.ndarray:
        pad = [(0, 0)] * x.ndim
        pad[axis] = (radius, radius)
        padded = np.pad(x, pad)
        c = np.cumsum(padded, axis=axis, dtype=np.float64)
        zero_shape = list(c.shape)
        zero_shape[axis] = 1
        c = np.concatenate([np.zeros(zero_shape), c], axis=axis)
        n = x.shape[axis]
        hi = np.take(c, np.arange(size, n + size), axis=axis)
        lo = np.take(c, np.arange(0, n), axis=axis)
        return (hi - lo) / size

    out = blur_axis(channels.astype(np.float64), 1)
    out = blur_axis(out, 2)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def corrupt(img: LaneImage, params: CorruptionParams) -> LaneImage:
    """Apply dropout, then jitter, then blur; deterministic for a fixed seed."""
    rng = np.random.default_rng(params.seed)
    ch = img.channels.copy()
    h, w = ch.shape[1], ch.shape[2]

    if params.dropout > 0.0:
        lit = np.argwhere(ch.max(axis=0) > 0.0)  # (n, 2) of (v, u), row-major
        n_lit = len(lit)
        n_drop = int(round(params.dropout * n_lit))
        if n_drop:
            drop = rng.choice(n_lit, size=n_drop, replace=False)
            vs, us = lit[drop, 0], lit[drop, 1]
            ch[:, vs, us] = 0.0

    if params.jitter_sigma > 0.0:
        lit = np.argwhere(ch.max(axis=0) > 0.0)
        if len(lit):
            offs = np.rint(rng.normal(0.0, params.jitter_sigma, size=lit.shape)).astype(np.int64)
            tv = lit[:, 0] + offs[:, 0]
            tu = lit[:, 1] + offs[:, 1]
            keep = (tv >= 0) & (tv < h) & (tu >= 0) & (tu < w)
            vals = ch[:, lit[:, 0], lit[:, 1]]
            out = np.zeros_like(ch)
            for k in range(3):
                np.maximum.at(out[k], (tv[keep], tu[keep]), vals[k, keep])
            ch = out

    if params.blur_radius > 0:
        ch = _box_blur(ch, params.blur_radius)

    return LaneImage(tile_id=img.tile_id, tile=img.tile, channels=ch)


def save_lane_image(img: LaneImage, path: str | Path) -> None:
    """Write the image as 8-bit RGB PNG, channel k mapped to color channel k."""
    arr = np.rint(img.channels * 255.0).astype(np.uint8)
    Image.fromarray(np.transpose(arr, (1, 2, 0)), mode="RGB").save(path)


def load_lane_image(path: str | Path, tile_id: str, tile: TileSpec) -> LaneImage:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return LaneImage(tile_id=tile_id, tile=tile, channels=np.transpose(arr, (2, 0, 1)))


def write_manifest(entries: list[tuple[str, TileSpec]], path: str | Path) -> None:
    """One line per tile: ``tile_id x y heading p w h`` (floats via repr, lossless)."""
    lines = []
    for tile_id, tile in entries:
        if " " in tile_id or not tile_id:
            raise InputDomainError(f"tile id {tile_id!r} must be non-empty and space-free")
        lines.append(
            f"{tile_id} {tile.center.x!r} {tile.center.y!r} {tile.heading!r} "
            f"{tile.pixel_size!r} {tile.width} {tile.height}"
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_manifest(path: str | Path) -> list[tuple[str, TileSpec]]:
    out = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 7:
            raise InputDomainError(f"manifest line {ln}: expected 7 fields, got {len(parts)}")
        tile_id, x, y, heading, p, w, h = parts
        out.append(
            (
                tile_id,
                TileSpec(
                    center=GlobalPoint(float(x), float(y)),
                    heading=float(heading),
                    pixel_size=float(p),
                    width=int(w),
                    height=int(h),
                ),
            )
        )
    return out
