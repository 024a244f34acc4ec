"""Density clustering of lane points.

The DBSCAN here is deliberately self-contained and order-canonical so results
are reproducible bit-for-bit: a point is core when it has at least ``min_pts``
neighbors within ``eps`` (itself included, distances compared with <=);
clusters are the connected components of core points; a border point joins the
cluster of its first core neighbor in canonical order (points sorted by
coordinates, then input index).  Neighbor lookups use a uniform grid with cell
size ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputDomainError
from .raster import LaneClass, LanePoint
from .unionfind import UnionFind


@dataclass(frozen=True, slots=True)
class DbscanParams:
    min_pts: int
    eps: float

    def __post_init__(self):
        if self.min_pts < 1:
            raise InputDomainError(f"min_pts must be >= 1, got {self.min_pts}")
        if not (self.eps > 0.0 and math.isfinite(self.eps)):
            raise InputDomainError(f"eps must be positive and finite, got {self.eps}")


# Defaults for clustering a whole road's point union and a single image.
ROAD_CLUSTER_PARAMS = DbscanParams(min_pts=6, eps=10.0)
IMAGE_CLUSTER_PARAMS = DbscanParams(min_pts=4, eps=5.0)


@dataclass(slots=True)
class LaneCluster:
    id: int
    points: list[LanePoint]
    lane_class: LaneClass


def _grid_index(coords: np.ndarray, eps: float) -> dict[tuple[int, int], list[int]]:
    cells: dict[tuple[int, int], list[int]] = {}
    cu = np.floor(coords / eps).astype(np.int64)
    for i, (cx, cy) in enumerate(cu):
        cells.setdefault((int(cx), int(cy)), []).append(i)
    return cells


def _neighbors(i: int, coords: np.ndarray, cells, eps: float) -> np.ndarray:
    cx = int(math.floor(coords[i, 0] / eps))
    cy = int(math.floor(coords[i, 1] / eps))
    cand: list[int] = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            cand.extend(cells.get((cx + dx, cy + dy), ()))
    cand_arr = np.array(cand, dtype=np.int64)
    d = coords[cand_arr] - coords[i]
    keep = (d[:, 0] ** 2 + d[:, 1] ** 2) <= eps * eps
    return cand_arr[keep]


def dbscan(points, params: DbscanParams) -> tuple[list[list[int]], list[int]]:
    """Cluster 2-D points; returns (clusters as index lists, noise indices).

    Cluster member lists and the noise list are sorted ascending; clusters are
    ordered by their first member in canonical order.
    """
    coords = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(coords)
    if n == 0:
        return [], []
    if not np.isfinite(coords).all():
        raise InputDomainError("points must be finite")

    # Canonical rank: position in the points sorted by (x, y, input index).
    order = np.lexsort((np.arange(n), coords[:, 1], coords[:, 0]))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    cells = _grid_index(coords, params.eps)
    neigh = [ _neighbors(i, coords, cells, params.eps) for i in range(n) ]
    core = np.array([len(neigh[i]) >= params.min_pts for i in range(n)])

    uf = UnionFind(n)
    for i in range(n):
        if not core[i]:
            continue
        for j in neigh[i]:
            if core[j] and j > i:
                uf.union(i, int(j))

    groups: dict[int, list[int]] = {}
    for i in range(n):
        if core[i]:
            groups.setdefault(uf.find(i), []).append(i)

    # Attach border points to the cluster of their first core neighbor in canonical order.
    noise: list[int] = []
    for i in range(n):
        if core[i]:
            continue
        core_neigh = [int(j) for j in neigh[i] if core[j]]
        if not core_neigh:
            noise.append(i)
            continue
        best = min(core_neigh, key=lambda j: rank[j])
        groups[uf.find(best)].append(i)

    clusters = sorted(groups.values(), key=lambda members: min(rank[m] for m in members))
    return [sorted(c) for c in clusters], sorted(noise)


def cluster_road_lanes(
    road_points: list[LanePoint],
    params: DbscanParams = ROAD_CLUSTER_PARAMS,
    dedup_cell: float = 0.125,
) -> tuple[list[LaneCluster], int]:
    """Cluster the union of one road's lane points into per-lane clusters.

    Points from overlapping tiles that land in the same ``dedup_cell`` grid
    cell are deduplicated first (the representative with the smallest
    provenance wins).  Returns the clusters plus the discarded noise count.
    A cluster's class is the majority class of its members, ties going to the
    lowest class index.
    """
    if dedup_cell <= 0:
        raise InputDomainError(f"dedup_cell must be positive, got {dedup_cell}")
    ordered = sorted(road_points, key=lambda p: p.source)
    reps: dict[tuple[int, int, int], LanePoint] = {}
    for p in ordered:
        key = (
            int(math.floor(p.position.x / dedup_cell)),
            int(math.floor(p.position.y / dedup_cell)),
            int(p.lane_class),
        )
        if key not in reps:
            reps[key] = p
    kept = sorted(reps.values(), key=lambda p: p.source)
    if not kept:
        return [], 0

    coords = np.array([[p.position.x, p.position.y] for p in kept])
    member_lists, noise = dbscan(coords, params)
    clusters = []
    for cid, members in enumerate(member_lists):
        pts = [kept[m] for m in members]
        counts: dict[int, int] = {}
        for p in pts:
            counts[int(p.lane_class)] = counts.get(int(p.lane_class), 0) + 1
        majority = min(counts, key=lambda k: (-counts[k], k))
        clusters.append(LaneCluster(id=cid, points=pts, lane_class=LaneClass(majority)))
    return clusters, len(noise)
