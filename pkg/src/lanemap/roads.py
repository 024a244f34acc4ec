"""Road network ingestion: GeoJSON parsing, arclength resampling, shape fits."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateFitError, InputDomainError, RoadParseError
from .geometry import GlobalPoint, TileSpec, in_tile_footprint

# Equatorial radius used for the equirectangular lon/lat projection (WGS84).
EARTH_RADIUS_M = 6378137.0


@dataclass(frozen=True, slots=True)
class Road:
    """A road centerline with an optional declared lane count."""

    id: str
    polyline: tuple[GlobalPoint, ...]
    lane_count: int | None = None

    def __post_init__(self):
        if len(self.polyline) < 2:
            raise InputDomainError(f"road {self.id!r} needs >= 2 vertices")
        for a, b in zip(self.polyline, self.polyline[1:]):
            if a.x == b.x and a.y == b.y:
                raise InputDomainError(f"road {self.id!r} has repeated consecutive vertices")

    @property
    def length(self) -> float:
        return sum(math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(self.polyline, self.polyline[1:]))


@dataclass(frozen=True, slots=True)
class RoadPoint:
    """A resampled centerline point with its tangent heading."""

    road_id: str
    position: GlobalPoint
    heading: float
    arclength: float


@dataclass(frozen=True, slots=True)
class ShapeCoeffs:
    """Quadratic local road shape y' = a*x'^2 + b*x' + c in the heading-aligned frame."""

    a: float
    b: float
    c: float
    residual: float


@dataclass(slots=True)
class RoadNetwork:
    roads: list[Road]
    frame: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def road_by_id(self, road_id: str) -> Road:
        for r in self.roads:
            if r.id == road_id:
                return r
        raise KeyError(road_id)


def _project_lonlat(coords, origin: tuple[float, float]) -> list[tuple[float, float]]:
    lon0, lat0 = origin
    k = math.cos(math.radians(lat0)) * EARTH_RADIUS_M
    out = []
    for lon, lat in coords:
        x = math.radians(lon - lon0) * k
        y = math.radians(lat - lat0) * EARTH_RADIUS_M
        out.append((x, y))
    return out


def parse_road_network(
    path: str | Path,
    coords: str = "planar",
    origin: tuple[float, float] | None = None,
) -> RoadNetwork:
    """Read a GeoJSON FeatureCollection of LineString roads.

    ``coords`` selects how positions are interpreted: "planar" takes them as
    meters, "lonlat" projects them equirectangularly about ``origin``
    (lon, lat degrees).  Zero-length geometries are dropped with a recorded
    warning; repeated consecutive vertices are deduplicated likewise.
    """
    if coords not in ("planar", "lonlat"):
        raise InputDomainError(f"unknown coords mode {coords!r}")
    if coords == "lonlat" and origin is None:
        raise InputDomainError("lonlat input requires a projection origin")
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RoadParseError(f"cannot read road network {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise RoadParseError("road network must be a GeoJSON FeatureCollection")

    frame = {"coords": "planar-meters"}
    if coords == "lonlat":
        frame = {"coords": "lonlat-equirectangular", "origin_lon": origin[0], "origin_lat": origin[1]}

    roads: list[Road] = []
    warnings: list[str] = []
    seen_ids: set[str] = set()
    for idx, feature in enumerate(doc.get("features", [])):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise RoadParseError(f"feature {idx}: geometry must be LineString, got {geom.get('type')!r}", idx)
        props = feature.get("properties") or {}
        road_id = props.get("id")
        if not isinstance(road_id, str) or not road_id:
            raise RoadParseError(f"feature {idx}: missing string property 'id'", idx)
        if road_id in seen_ids:
            raise RoadParseError(f"feature {idx}: duplicate road id {road_id!r}", idx)
        lanes = props.get("lanes")
        if lanes is not None and (not isinstance(lanes, int) or lanes < 1):
            raise RoadParseError(f"feature {idx}: 'lanes' must be a positive integer", idx)
        raw = geom.get("coordinates")
        if not isinstance(raw, list) or any(len(c) < 2 for c in raw):
            raise RoadParseError(f"feature {idx}: malformed coordinates", idx)
        pts = [(float(c[0]), float(c[1])) for c in raw]
        if coords == "lonlat":
            pts = _project_lonlat(pts, origin)

        deduped: list[tuple[float, float]] = []
        dropped = 0
        for p in pts:
            if deduped and p == deduped[-1]:
                dropped += 1
                continue
            deduped.append(p)
        if dropped:
            warnings.append(f"feature {idx} ({road_id}): removed {dropped} repeated consecutive vertices")
        if len(deduped) < 2:
            warnings.append(f"feature {idx} ({road_id}): rejected zero-length geometry")
            continue
        seen_ids.add(road_id)
        roads.append(Road(road_id, tuple(GlobalPoint(x, y) for x, y in deduped), lanes))
    return RoadNetwork(roads=roads, frame=frame, warnings=warnings)


def interpolate_road(road: Road, spacing: float = 1.0) -> list[RoadPoint]:
    """Resample a centerline at fixed arclength intervals.

    Yields floor(length/spacing) + 1 points starting at arclength 0.  The
    heading of a point that falls exactly on a vertex comes from the following
    segment; the final point keeps the last segment's heading.
    """
    if spacing <= 0:
        raise InputDomainError(f"spacing must be positive, got {spacing}")
    verts = road.polyline
    seg_len = [math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(verts, verts[1:])]
    cum = [0.0]
    for sl in seg_len:
        cum.append(cum[-1] + sl)
    total = cum[-1]
    headings = [math.atan2(b.y - a.y, b.x - a.x) for a, b in zip(verts, verts[1:])]

    # Relative guard so a length of n*spacing minus float noise still yields its endpoint.
    count = int(math.floor(total / spacing + 1e-9)) + 1
    out: list[RoadPoint] = []
    for k in range(count):
        s = k * spacing
        i = bisect.bisect_right(cum, s) - 1
        if i >= len(seg_len):
            i = len(seg_len) - 1
        t = min((s - cum[i]) / seg_len[i], 1.0)
        a, b = verts[i], verts[i + 1]
        pos = GlobalPoint(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
        out.append(RoadPoint(road.id, pos, headings[i], s))
    return out


def tile_for_road_point(
    rp: RoadPoint,
    pixel_size: float = 0.25,
    width: int = 256,
    height: int = 256,
) -> TileSpec:
    """The image tile centered on a road point, rotated to its heading."""
    return TileSpec(center=rp.position, heading=rp.heading, pixel_size=pixel_size, width=width, height=height)


def shape_window(rp: RoadPoint, road_points: list[RoadPoint], tile: TileSpec) -> list[RoadPoint]:
    """Same-road points that fall inside the tile footprint of ``rp``."""
    return [q for q in road_points if q.road_id == rp.road_id and in_tile_footprint(q.position, tile)]


def fit_road_shape(rp: RoadPoint, window: list[RoadPoint]) -> ShapeCoeffs:
    """Least-squares quadratic fit of the local road shape around ``rp``.

    The window points are expressed in the frame centered at ``rp`` with x'
    along the heading and y' to its left, then y' = a*x'^2 + b*x' + c is fit.
    Raises DegenerateFitError for windows of fewer than 3 points or with no
    extent along the heading.
    """
    if len(window) < 3:
        raise DegenerateFitError(f"shape window has {len(window)} points, need >= 3")
    c = math.cos(rp.heading)
    s = math.sin(rp.heading)
    dx = np.array([q.position.x - rp.position.x for q in window])
    dy = np.array([q.position.y - rp.position.y for q in window])
    xp = c * dx + s * dy
    yp = -s * dx + c * dy
    if xp.max() - xp.min() < 1e-9:
        raise DegenerateFitError("shape window has no extent along the heading")
    design = np.stack([xp * xp, xp, np.ones_like(xp)], axis=1)
    coeffs, _, _, _ = np.linalg.lstsq(design, yp, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coeffs - yp) ** 2)))
    return ShapeCoeffs(float(coeffs[0]), float(coeffs[1]), float(coeffs[2]), residual)
