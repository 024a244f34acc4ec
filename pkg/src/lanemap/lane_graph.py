"""Per-image lane graphs and their cross-image merge.

Each image's point clusters become edges whose endpoints are the cluster's
exact farthest point pair.  Merging unions vertices that lie within a merge
radius of each other (transitively), replaces each group by the centroid of
its member endpoints, rewires edges, drops degenerate loops, and fuses
parallel duplicates of the same class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import IMAGE_CLUSTER_PARAMS, DbscanParams, dbscan
from .errors import InputDomainError
from .geometry import GlobalPoint
from .raster import LaneClass, LanePoint
from .unionfind import UnionFind


@dataclass(slots=True)
class Vertex:
    id: int
    position: GlobalPoint
    # (provenance, original endpoint position) per merged endpoint, sorted by provenance
    members: list[tuple[tuple[str, int, int], tuple[float, float]]]


@dataclass(slots=True)
class Edge:
    id: int
    vertices: tuple[int, int]
    lane_class: LaneClass
    support: list[LanePoint]


@dataclass(slots=True)
class LaneGraph:
    vertices: list[Vertex] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    skipped_clusters: int = 0
    dropped_edges: int = 0

    def vertex_by_id(self) -> dict[int, Vertex]:
        return {v.id: v for v in self.vertices}


def _convex_hull(coords: np.ndarray) -> np.ndarray:
    """Indices of the convex hull of unique, lexicographically sorted coords."""
    n = len(coords)
    if n <= 2:
        return np.arange(n)

    def cross(o, a, b):
        return (coords[a, 0] - coords[o, 0]) * (coords[b, 1] - coords[o, 1]) - (
            coords[a, 1] - coords[o, 1]
        ) * (coords[b, 0] - coords[o, 0])

    lower: list[int] = []
    for i in range(n):
        while len(lower) >= 2 and cross(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(i)
    upper: list[int] = []
    for i in range(n - 1, -1, -1):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(i)
    return np.array(lower[:-1] + upper[:-1], dtype=np.int64)


def farthest_pair(points) -> tuple[int, int]:
    """Indices (i, j), i < j, of an exact farthest pair of 2-D points.

    Computed on the convex hull of the distinct coordinates, so it stays exact
    while avoiding the full quadratic scan.  Distance ties resolve to the
    lexicographically smallest index pair.
    """
    coords = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(coords) < 2:
        raise InputDomainError(f"farthest_pair needs >= 2 points, got {len(coords)}")

    first_idx: dict[tuple[float, float], int] = {}
    for i, (x, y) in enumerate(coords):
        first_idx.setdefault((float(x), float(y)), i)
    uniq = sorted(first_idx)
    if len(uniq) < 2:
        raise InputDomainError("farthest_pair needs >= 2 distinct points")
    uc = np.array(uniq)

    if len(uc) > 16:
        hull = _convex_hull(uc)
        uc = uc[hull]

    best = -1.0
    best_pair: tuple[int, int] | None = None
    for a in range(len(uc)):
        d = uc[a + 1 :] - uc[a]
        if len(d) == 0:
            continue
        d2 = d[:, 0] ** 2 + d[:, 1] ** 2
        m = float(d2.max())
        if m < best:
            continue
        for b in np.nonzero(d2 == m)[0]:
            ia = first_idx[tuple(uc[a])]
            ib = first_idx[tuple(uc[a + 1 + b])]
            pair = (min(ia, ib), max(ia, ib))
            if m > best or (best_pair is not None and pair < best_pair):
                best = m
                best_pair = pair
    return best_pair


def image_to_graph(points: list[LanePoint], params: DbscanParams = IMAGE_CLUSTER_PARAMS) -> LaneGraph:
    """Build one image's lane graph: a two-vertex edge per point cluster.

    Clusters that collapse to a single distinct coordinate are skipped and
    counted in ``skipped_clusters``.
    """
    if not points:
        return LaneGraph()
    tile_ids = {p.source[0] for p in points}
    if len(tile_ids) != 1:
        raise InputDomainError(f"points must come from one image, got tiles {sorted(tile_ids)}")

    pts = sorted(points, key=lambda p: p.source)
    coords = np.array([[p.position.x, p.position.y] for p in pts])
    member_lists, _ = dbscan(coords, params)

    graph = LaneGraph()
    vid = 0
    for eid, members in enumerate(member_lists):
        cluster_pts = [pts[m] for m in members]
        cluster_coords = coords[members]
        distinct = {(float(x), float(y)) for x, y in cluster_coords}
        if len(distinct) < 2:
            graph.skipped_clusters += 1
            continue
        ia, ib = farthest_pair(cluster_coords)
        pa, pb = cluster_pts[ia], cluster_pts[ib]
        if pb.source < pa.source:
            pa, pb = pb, pa
        counts: dict[int, int] = {}
        for p in cluster_pts:
            counts[int(p.lane_class)] = counts.get(int(p.lane_class), 0) + 1
        majority = LaneClass(min(counts, key=lambda k: (-counts[k], k)))
        va = Vertex(vid, pa.position, [(pa.source, (pa.position.x, pa.position.y))])
        vb = Vertex(vid + 1, pb.position, [(pb.source, (pb.position.x, pb.position.y))])
        vid += 2
        graph.vertices.extend([va, vb])
        graph.edges.append(
            Edge(
                id=len(graph.edges),
                vertices=(va.id, vb.id),
                lane_class=majority,
                support=cluster_pts,
            )
        )
    return graph


def merge_graphs(graphs: list[LaneGraph], merge_radius: float = 1.0) -> LaneGraph:
    """Union per-image graphs into one road-level graph.

    Vertices within ``merge_radius`` of each other merge transitively; a merged
    vertex sits at the centroid of its member endpoints.  Degenerate loop edges
    are dropped (counted), and parallel edges with the same vertex pair and
    class fuse with their supports united.
    """
    if merge_radius <= 0:
        raise InputDomainError(f"merge_radius must be positive, got {merge_radius}")

    all_vertices: list[tuple[int, Vertex]] = []  # (graph index, vertex)
    for gi, g in enumerate(graphs):
        for v in g.vertices:
            all_vertices.append((gi, v))
    n = len(all_vertices)
    merged = LaneGraph(
        skipped_clusters=sum(g.skipped_clusters for g in graphs),
        dropped_edges=sum(g.dropped_edges for g in graphs),
    )
    if n == 0:
        return merged

    coords = np.array([[v.position.x, v.position.y] for _, v in all_vertices])
    cells: dict[tuple[int, int], list[int]] = {}
    for i in range(n):
        key = (int(math.floor(coords[i, 0] / merge_radius)), int(math.floor(coords[i, 1] / merge_radius)))
        cells.setdefault(key, []).append(i)

    uf = UnionFind(n)
    r2 = merge_radius * merge_radius
    for i in range(n):
        cx = int(math.floor(coords[i, 0] / merge_radius))
        cy = int(math.floor(coords[i, 1] / merge_radius))
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for j in cells.get((cx + dx, cy + dy), ()):
                    if j <= i:
                        continue
                    d = coords[j] - coords[i]
                    if d[0] * d[0] + d[1] * d[1] <= r2:
                        uf.union(i, j)

    comp: dict[int, list[int]] = {}
    for i in range(n):
        comp.setdefault(uf.find(i), []).append(i)

    def comp_key(members: list[int]):
        return min(min(m[0] for m in all_vertices[i][1].members) for i in members)

    new_id_of: dict[tuple[int, int], int] = {}
    for new_id, members in enumerate(sorted(comp.values(), key=comp_key)):
        endpoint_map: dict[tuple[str, int, int], tuple[float, float]] = {}
        for i in members:
            gi, v = all_vertices[i]
            for prov, pos in v.members:
                endpoint_map.setdefault(prov, pos)
            new_id_of[(gi, v.id)] = new_id
        endpoints = sorted(endpoint_map.items())
        cx = sum(pos[0] for _, pos in endpoints) / len(endpoints)
        cy = sum(pos[1] for _, pos in endpoints) / len(endpoints)
        merged.vertices.append(Vertex(new_id, GlobalPoint(cx, cy), endpoints))

    by_pair: dict[tuple[int, int, int], dict[tuple[str, int, int], LanePoint]] = {}
    for gi, g in enumerate(graphs):
        for e in g.edges:
            a = new_id_of[(gi, e.vertices[0])]
            b = new_id_of[(gi, e.vertices[1])]
            if a == b:
                merged.dropped_edges += 1
                continue
            key = (min(a, b), max(a, b), int(e.lane_class))
            support = by_pair.setdefault(key, {})
            for p in e.support:
                support.setdefault(p.source, p)
    for eid, key in enumerate(sorted(by_pair)):
        a, b, cls = key
        support = [by_pair[key][src] for src in sorted(by_pair[key])]
        merged.edges.append(Edge(id=eid, vertices=(a, b), lane_class=LaneClass(cls), support=support))
    return merged
