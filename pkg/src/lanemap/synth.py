"""Synthetic road worlds with known lane-level ground truth.

Roads are gentle constant-curvature arcs laid out in separated rows; lanes are
parallel offsets of each centerline with classes cycling through the palette.
Unless the fixtures are disabled, road 0 carries a merging Y branch and road 1
is a hairpin U-turn, mirroring the awkward cases a mapper has to survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputDomainError
from .geometry import GlobalPoint
from .merger import HDMap, Lane
from .raster import LaneClass
from .roads import Road, RoadNetwork

PLANAR_FRAME = {"coords": "planar-meters"}


@dataclass(frozen=True, slots=True)
class SyntheticWorldSpec:
    n_roads: int = 20
    lanes_min: int = 2
    lanes_max: int = 4
    curvature_max: float = 0.003  # 1/m
    lane_spacing: float = 3.5
    lane_classes: tuple[LaneClass, ...] = (LaneClass.BROKEN_WHITE, LaneClass.WHITE, LaneClass.YELLOW)
    extent: float = 2400.0
    length_min: float = 120.0
    length_max: float = 180.0
    y_fixture: bool = True
    uturn_fixture: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_roads < 0:
            raise InputDomainError(f"n_roads must be >= 0, got {self.n_roads}")
        if not 1 <= self.lanes_min <= self.lanes_max:
            raise InputDomainError(f"bad lane range [{self.lanes_min}, {self.lanes_max}]")
        if self.lane_spacing <= 0 or self.extent <= 0:
            raise InputDomainError("lane_spacing and extent must be positive")
        if self.curvature_max < 0 or self.length_min <= 0 or self.length_max < self.length_min:
            raise InputDomainError("bad curvature/length ranges")


def _arc(x0: float, y0: float, heading0: float, curvature: float, length: float, step: float = 1.0):
    """Integrate a constant-curvature centerline; returns (vertices, headings)."""
    n = int(math.floor(length / step + 1e-9))
    xs, ys, hs = [x0], [y0], [heading0]
    x, y, h = x0, y0, heading0
    for _ in range(n):
        x += math.cos(h) * step
        y += math.sin(h) * step
        h += curvature * step
        xs.append(x)
        ys.append(y)
        hs.append(h)
    return list(zip(xs, ys)), hs


def _offset_polyline(verts, headings, offset: float) -> tuple[GlobalPoint, ...]:
    out = []
    for (x, y), h in zip(verts, headings):
        out.append(GlobalPoint(x - offset * math.sin(h), y + offset * math.cos(h)))
    return tuple(out)


def _lane_offsets(k: int, spacing: float) -> list[float]:
    return [(i - (k - 1) / 2.0) * spacing for i in range(k)]


def _smoothstep(t: float) -> float:
    return 3.0 * t * t - 2.0 * t * t * t


def generate_world(spec: SyntheticWorldSpec) -> tuple[RoadNetwork, HDMap]:
    """Build the road network and its ground-truth lane map, fully seeded."""
    rng = np.random.default_rng(spec.seed)
    pitch = spec.extent / max(spec.n_roads, 1)
    roads: list[Road] = []
    gt_lanes: list[Lane] = []

    def classes(i: int) -> LaneClass:
        return spec.lane_classes[i % len(spec.lane_classes)]

    def add_lanes(road_id: str, verts, headings, k: int):
        for i, off in enumerate(_lane_offsets(k, spec.lane_spacing)):
            gt_lanes.append(
                Lane(
                    id=f"{road_id}_lane_{i}",
                    road_id=road_id,
                    lane_class=classes(i),
                    polyline=_offset_polyline(verts, headings, off),
                )
            )

    for r in range(spec.n_roads):
        road_id = f"road_{r:03d}"
        y0 = r * pitch
        k = int(rng.integers(spec.lanes_min, spec.lanes_max + 1))

        if r == 0 and spec.y_fixture and spec.lanes_max >= 2:
            # Straight road with a branch lane merging in from the side and
            # ending short of its neighbor.
            length = 160.0
            verts, headings = _arc(0.0, y0, 0.0, 0.0, length)
            roads.append(Road(road_id, tuple(GlobalPoint(x, y) for x, y in verts), lane_count=3))
            add_lanes(road_id, verts, headings, 2)
            top = _lane_offsets(2, spec.lane_spacing)[-1]
            branch_span = 96.0
            branch = []
            for x, _ in verts:
                if x > branch_span:
                    break
                off = top + 1.75 + 5.25 * (1.0 - _smoothstep(x / branch_span))
                branch.append(GlobalPoint(x, y0 + off))
            gt_lanes.append(
                Lane(
                    id=f"{road_id}_lane_branch",
                    road_id=road_id,
                    lane_class=classes(2),
                    polyline=tuple(branch),
                )
            )
            continue

        if r == 1 and spec.uturn_fixture:
            # Hairpin: out, half circle, back.
            leg, radius = 60.0, 12.0
            v1, h1 = _arc(0.0, y0, 0.0, 0.0, leg)
            v2, h2 = _arc(v1[-1][0], v1[-1][1], h1[-1], 1.0 / radius, math.pi * radius)
            v3, h3 = _arc(v2[-1][0], v2[-1][1], h2[-1], 0.0, leg)
            verts = v1 + v2[1:] + v3[1:]
            headings = h1 + h2[1:] + h3[1:]
            k = 2
            roads.append(Road(road_id, tuple(GlobalPoint(x, y) for x, y in verts), lane_count=k))
            add_lanes(road_id, verts, headings, k)
            continue

        length = float(rng.uniform(spec.length_min, spec.length_max))
        curvature = float(rng.uniform(-spec.curvature_max, spec.curvature_max))
        heading0 = float(rng.uniform(-0.1, 0.1))
        verts, headings = _arc(0.0, y0, heading0, curvature, length)
        roads.append(Road(road_id, tuple(GlobalPoint(x, y) for x, y in verts), lane_count=k))
        add_lanes(road_id, verts, headings, k)

    network = RoadNetwork(roads=roads, frame=dict(PLANAR_FRAME), warnings=[])
    gt_map = HDMap(lanes=gt_lanes, frame=dict(PLANAR_FRAME), road_stats={})
    return network, gt_map
