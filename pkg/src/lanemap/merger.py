"""Fuse per-road clusters with the road's lane graph into HD map lanes.

Each cluster/edge pair is scored by how many lane points they share (by
provenance), the pairing is solved as a maximum assignment, and every kept
pair becomes one lane.  The lane polyline comes from ordering the cluster's
points along the paired edge's axis, averaging them into evenly spaced bins,
and thinning the result with Douglas-Peucker.  Clusters that double back on
the axis (U-turn shapes) are ordered by geodesic distance from one lane tip
across a thinned occupancy grid instead, which follows the curve where a
straight axis cannot.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import WeightMatrix, max_assignment
from .clustering import LaneCluster
from .errors import InputDomainError
from .geometry import GlobalPoint
from .lane_graph import LaneGraph, farthest_pair
from .raster import LaneClass, LanePoint

# Spacing (m) of the averaged samples a lane polyline is built from; also the
# occupancy-grid cell size used for the geodesic ordering probe.
SAMPLE_SPACING = 0.25
# Fraction of ordered grid cells allowed to step against the projection axis
# before the ordering switches to geodesic distance (U-turn shapes).
INVERSION_LIMIT = 0.05


@dataclass(slots=True)
class Lane:
    id: str
    road_id: str
    lane_class: LaneClass
    polyline: tuple[GlobalPoint, ...]
    provenance: tuple[int, int] | None = None  # (cluster id, edge id); edge -1 for cluster-only

    def __post_init__(self):
        if len(self.polyline) < 2:
            raise InputDomainError(f"lane {self.id!r} needs >= 2 polyline points")
        for a, b in zip(self.polyline, self.polyline[1:]):
            if a.x == b.x and a.y == b.y:
                raise InputDomainError(f"lane {self.id!r} has repeated consecutive points")


@dataclass(slots=True)
class HDMap:
    lanes: list[Lane]
    frame: dict = field(default_factory=dict)
    road_stats: dict = field(default_factory=dict)


def simplify_polyline(coords: np.ndarray, tolerance: float) -> list[int]:
    """Douglas-Peucker: indices of the kept vertices (always includes the ends)."""
    n = len(coords)
    if n <= 2:
        return list(range(n))
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        seg = coords[lo + 1 : hi]
        a = coords[lo]
        b = coords[hi]
        ab = b - a
        ab_len = math.hypot(ab[0], ab[1])
        if ab_len == 0.0:
            d = np.hypot(seg[:, 0] - a[0], seg[:, 1] - a[1])
        else:
            d = np.abs((seg[:, 0] - a[0]) * ab[1] - (seg[:, 1] - a[1]) * ab[0]) / ab_len
        im = int(np.argmax(d))
        if d[im] > tolerance:
            mid = lo + 1 + im
            keep[mid] = True
            stack.append((lo, mid))
            stack.append((mid, hi))
    return [int(i) for i in np.nonzero(keep)[0]]


def sharing_matrix(clusters: list[LaneCluster], graph: LaneGraph) -> WeightMatrix:
    """Count of lane points shared (by provenance) between each cluster and edge support."""
    values = np.zeros((len(clusters), len(graph.edges)))
    cluster_sets = [{p.source for p in c.points} for c in clusters]
    for j, e in enumerate(graph.edges):
        support = {p.source for p in e.support}
        for i, cset in enumerate(cluster_sets):
            values[i, j] = float(len(cset & support))
    return WeightMatrix(values, row_ids=[c.id for c in clusters], col_ids=[e.id for e in graph.edges])


def _thin_grid(coords: np.ndarray, cell: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bucket points into square cells of the given size.

    Returns (cell keys, cell centroids, cell index of every point); cells are
    in (kx, ky) order so the layout is independent of the input order.
    """
    keys = np.floor(coords / cell).astype(np.int64)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    sums = np.zeros((len(uniq), 2))
    np.add.at(sums, inverse, coords)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(float)
    return uniq, sums / counts[:, None], inverse


def _grid_adjacency(keys: np.ndarray, centroids: np.ndarray, reach: int) -> list[list[tuple[int, float]]]:
    index = {(int(kx), int(ky)): i for i, (kx, ky) in enumerate(keys)}
    offsets = [
        (dx, dy)
        for dx in range(-reach, reach + 1)
        for dy in range(-reach, reach + 1)
        if (dx, dy) != (0, 0)
    ]
    neighbors: list[list[tuple[int, float]]] = []
    for i, (kx, ky) in enumerate(keys):
        row: list[tuple[int, float]] = []
        for dx, dy in offsets:
            j = index.get((int(kx) + dx, int(ky) + dy))
            if j is not None:
                d = centroids[j] - centroids[i]
                row.append((j, math.hypot(float(d[0]), float(d[1]))))
        neighbors.append(row)
    return neighbors


def _geodesic_from(source: int, neighbors: list[list[tuple[int, float]]]) -> np.ndarray:
    """Dijkstra distances from one cell through the adjacency lists."""
    dist = np.full(len(neighbors), np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist[i]:
            continue
        for j, w in neighbors[i]:
            nd = d + w
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(heap, (nd, j))
    return dist


def _geodesic_order(keys: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Distance of every cell from one extreme lane tip, walking cell to cell.

    The tip is found with the usual double sweep: walk out from an arbitrary
    cell, take the farthest cell reached, and measure from there.  The reach
    doubles until the grid is connected, so sparse clusters still order.
    """
    m = len(keys)
    reach = 2
    while True:
        neighbors = _grid_adjacency(keys, centroids, reach)
        d0 = _geodesic_from(0, neighbors)
        if not math.isinf(float(d0.max())):
            break
        reach *= 2
    e1 = int(np.lexsort((np.arange(m), -d0))[0])
    return _geodesic_from(e1, neighbors)


def _order_parameter(coords: np.ndarray, va: GlobalPoint, vb: GlobalPoint) -> np.ndarray:
    """Monotone-along-the-lane parameter for every point.

    Projection on the va->vb axis by default; when the cells walked in
    geodesic order keep folding back on the axis no matter which way the walk
    is oriented (the lane doubles back, as in a U-turn), the geodesic distance
    from one lane tip is used instead.
    """
    axis = np.array([vb.x - va.x, vb.y - va.y])
    norm = math.hypot(axis[0], axis[1])
    if norm == 0.0:
        raise InputDomainError("edge endpoints coincide")
    axis /= norm
    t = (coords[:, 0] - va.x) * axis[0] + (coords[:, 1] - va.y) * axis[1]
    if len(coords) < 3:
        return t
    keys, centroids, point_cell = _thin_grid(coords, SAMPLE_SPACING)
    if len(keys) < 3:
        return t
    u = _geodesic_order(keys, centroids)
    tc = (centroids[:, 0] - va.x) * axis[0] + (centroids[:, 1] - va.y) * axis[1]
    walk = tc[np.lexsort((np.arange(len(u)), u))]
    steps = np.diff(walk)
    # The sweep direction is arbitrary, so count folds against both
    # orientations; a straight lane scores ~zero one way, a U-turn both ways.
    folds = min(
        int(np.sum(steps < -0.5 * SAMPLE_SPACING)),
        int(np.sum(steps > 0.5 * SAMPLE_SPACING)),
    )
    if folds > INVERSION_LIMIT * (len(walk) - 1):
        return u[point_cell]
    return t


def _lane_polyline(points: list[LanePoint], va, vb, tolerance: float) -> tuple[GlobalPoint, ...]:
    """Build a lane polyline: order, average into bins, Douglas-Peucker."""
    coords = np.array([[p.position.x, p.position.y] for p in points])
    u = _order_parameter(coords, va, vb)
    bins = np.floor(u / SAMPLE_SPACING).astype(np.int64)
    uniq, inverse = np.unique(bins, return_inverse=True)
    sums = np.zeros((len(uniq), 2))
    np.add.at(sums, inverse, coords)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(float)
    reps = sums / counts[:, None]
    dedup: list[tuple[float, float]] = []
    for x, y in reps:
        xy = (float(x), float(y))
        if not dedup or xy != dedup[-1]:
            dedup.append(xy)
    if len(dedup) < 2:
        return ()
    arr = np.array(dedup)
    kept = simplify_polyline(arr, tolerance)
    out: list[GlobalPoint] = []
    for i in kept:
        p = GlobalPoint(float(arr[i, 0]), float(arr[i, 1]))
        if not out or p.x != out[-1].x or p.y != out[-1].y:
            out.append(p)
    return tuple(out)


def merge_road(
    clusters: list[LaneCluster],
    graph: LaneGraph,
    dp_tolerance: float = 0.1,
    road_id: str = "",
) -> tuple[list[Lane], dict]:
    """Pair clusters with graph edges and emit one lane per kept pair.

    Pairs sharing zero points are discarded; unmatched clusters and edges are
    only counted.  Returns (lanes, stats).
    """
    stats = {
        "clusters": len(clusters),
        "edges": len(graph.edges),
        "matched": 0,
        "unmatched_clusters": 0,
        "unmatched_edges": 0,
        "degenerate_lanes": 0,
        "noise_points": 0,
        "skipped_image_clusters": graph.skipped_clusters,
        "dropped_edges": graph.dropped_edges,
    }
    lanes: list[Lane] = []
    if clusters and graph.edges:
        weights = sharing_matrix(clusters, graph)
        perm = max_assignment(weights.values)
        vertex = graph.vertex_by_id()
        matched_rows = set()
        matched_cols = set()
        for i, j in perm.pairs:
            if weights.values[i, j] <= 0.0:
                continue
            cluster = clusters[i]
            edge = graph.edges[j]
            va = vertex[edge.vertices[0]].position
            vb = vertex[edge.vertices[1]].position
            polyline = _lane_polyline(cluster.points, va, vb, dp_tolerance)
            if len(polyline) < 2:
                stats["degenerate_lanes"] += 1
                continue
            matched_rows.add(i)
            matched_cols.add(j)
            lanes.append(
                Lane(
                    id=f"{road_id}:pair_{len(lanes):03d}" if road_id else f"pair_{len(lanes):03d}",
                    road_id=road_id,
                    lane_class=cluster.lane_class,
                    polyline=polyline,
                    provenance=(cluster.id, edge.id),
                )
            )
        stats["matched"] = len(lanes)
        stats["unmatched_clusters"] = len(clusters) - len(matched_rows)
        stats["unmatched_edges"] = len(graph.edges) - len(matched_cols)
    else:
        stats["unmatched_clusters"] = len(clusters)
        stats["unmatched_edges"] = len(graph.edges)
    return lanes, stats


def cluster_only_lanes(
    clusters: list[LaneCluster],
    dp_tolerance: float = 0.1,
    road_id: str = "",
) -> list[Lane]:
    """Baseline mapper: one lane per cluster, axis from its own farthest pair.

    Used to compare the fused pipeline against plain clustering.
    """
    lanes: list[Lane] = []
    for cluster in clusters:
        coords = [(p.position.x, p.position.y) for p in cluster.points]
        if len(set(coords)) < 2:
            continue
        ia, ib = farthest_pair(coords)
        polyline = _lane_polyline(
            cluster.points, cluster.points[ia].position, cluster.points[ib].position, dp_tolerance
        )
        if len(polyline) < 2:
            continue
        lanes.append(
            Lane(
                id=f"{road_id}:cluster_{cluster.id:03d}" if road_id else f"cluster_{cluster.id:03d}",
                road_id=road_id,
                lane_class=cluster.lane_class,
                polyline=polyline,
                provenance=(cluster.id, -1),
            )
        )
    return lanes


def assemble_hd_map(road_results: dict[str, tuple[list[Lane], dict]], frame: dict | None = None) -> HDMap:
    """Combine per-road lanes into one map with stable sequential lane ids."""
    lanes: list[Lane] = []
    stats: dict = {}
    for road_id in sorted(road_results):
        road_lanes, road_stats = road_results[road_id]
        stats[road_id] = dict(road_stats)
        lanes.extend(road_lanes)
    for k, lane in enumerate(lanes):
        lane.id = f"lane_{k:05d}"
    return HDMap(lanes=lanes, frame=dict(frame or {}), road_stats=stats)
