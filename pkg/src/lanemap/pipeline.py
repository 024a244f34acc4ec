"""End-to-end pipeline: roads -> tiles -> lane images -> dual mappers -> fused map -> metrics.

All stage outputs are deterministic for a fixed config and seed: inputs are
processed in canonical order, artifacts are serialized with sorted keys and
fixed float precision, and no timestamps are embedded.
"""

from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import DbscanParams, cluster_road_lanes, dbscan
from .errors import DegenerateFitError, InputDomainError, PipelineStageError
from .geometry import GlobalPoint, TileSpec
from .lane_graph import image_to_graph, merge_graphs
from .merger import HDMap, Lane, assemble_hd_map, merge_road
from .metrics import (
    DEFAULT_MATCH_CUTOFF,
    DEFAULT_THRESHOLDS,
    MetricsReport,
    compute_vector_metrics,
    lane_count_discrepancy,
)
from .raster import (
    CorruptionParams,
    LaneClass,
    LaneImage,
    LanePoint,
    binarize_channels,
    corrupt,
    lane_points_from_image,
    load_lane_image,
    read_manifest,
    render_synthetic_tile,
    save_lane_image,
    write_manifest,
)
from .roads import (
    RoadNetwork,
    fit_road_shape,
    interpolate_road,
    parse_road_network,
    shape_window,
    tile_for_road_point,
)
from .synth import SyntheticWorldSpec, generate_world


@dataclass(slots=True)
class PipelineConfig:
    # Inputs: exactly one lane image source (synthetic world, rendered gt, or image dir).
    out_dir: str | None = None
    roads_path: str | None = None
    coords: str = "planar"
    origin: tuple[float, float] | None = None
    gt_map_path: str | None = None
    images_dir: str | None = None
    world: SyntheticWorldSpec | None = None

    # Tiling.
    spacing: float = 1.0
    pixel_size: float = 0.25
    tile_width: int = 256
    tile_height: int = 256
    tile_spacing: float = 1.0
    stroke_width: int = 1

    # Mappers.
    cluster_min_pts: int = 6
    cluster_eps: float = 10.0
    image_min_pts: int = 4
    image_eps: float = 5.0
    merge_radius: float = 1.0
    dp_tolerance: float = 0.1

    # Evaluation.
    evaluate: bool = True
    match_cutoff: float = DEFAULT_MATCH_CUTOFF
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    corruption: CorruptionParams | None = None
    write_images: bool = False
    seed: int = 0
    parallelism: int = 1

    def validate(self) -> None:
        sources = sum(1 for s in (self.world, self.images_dir) if s)
        if self.world is None and self.roads_path is None:
            raise InputDomainError("config needs either a synthetic world or a roads file")
        if sources == 0 and self.gt_map_path is None:
            raise InputDomainError("config needs a lane image source: world, images_dir, or gt_map_path to render")
        if sources > 1:
            raise InputDomainError("world and images_dir are mutually exclusive")
        if self.spacing <= 0 or self.tile_spacing <= 0:
            raise InputDomainError("spacing and tile_spacing must be positive")
        if self.tile_spacing + 1e-9 < self.spacing:
            raise InputDomainError("tile_spacing cannot be smaller than the road point spacing")
        if self.pixel_size <= 0 or self.tile_width <= 0 or self.tile_height <= 0:
            raise InputDomainError("tile parameters must be positive")
        if self.parallelism < 1:
            raise InputDomainError("parallelism must be >= 1")
        if self.stroke_width < 1:
            raise InputDomainError("stroke_width must be >= 1")
        # Parameter objects validate themselves on construction.
        DbscanParams(self.cluster_min_pts, self.cluster_eps)
        DbscanParams(self.image_min_pts, self.image_eps)
        if self.merge_radius <= 0 or self.dp_tolerance < 0 or self.match_cutoff <= 0:
            raise InputDomainError("merge_radius/dp_tolerance/match_cutoff out of range")
        if any(t <= 0 for t in self.thresholds):
            raise InputDomainError("thresholds must be positive")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("out_dir", "roads_path", "gt_map_path", "images_dir"):
            if d[key] is not None:
                d[key] = str(d[key])
        if self.world is not None:
            w = dataclasses.asdict(self.world)
            w["lane_classes"] = [c.label for c in self.world.lane_classes]
            d["world"] = w
        d["thresholds"] = list(self.thresholds)
        if self.origin is not None:
            d["origin"] = list(self.origin)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        data = dict(raw)
        if data.get("world") is not None:
            w = dict(data["world"])
            if "lane_classes" in w:
                w["lane_classes"] = tuple(LaneClass.from_label(c) for c in w["lane_classes"])
            data["world"] = SyntheticWorldSpec(**w)
        if data.get("corruption") is not None:
            data["corruption"] = CorruptionParams(**data["corruption"])
        if data.get("thresholds") is not None:
            data["thresholds"] = tuple(float(t) for t in data["thresholds"])
        if data.get("origin") is not None:
            data["origin"] = tuple(data["origin"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InputDomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def export_geojson(hdmap: HDMap, path: str | Path | None = None) -> dict:
    """HDMap as a GeoJSON FeatureCollection; coordinates rounded to 1e-6 m."""
    features = []
    for lane in hdmap.lanes:
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[round(p.x, 6), round(p.y, 6)] for p in lane.polyline],
                },
                "properties": {"id": lane.id, "road_id": lane.road_id, "lane_class": lane.lane_class.label},
            }
        )
    doc = {
        "type": "FeatureCollection",
        "features": features,
        "frame": dict(hdmap.frame),
        "road_stats": hdmap.road_stats,
    }
    if path is not None:
        Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
    return doc


def import_geojson(source: str | Path | dict) -> HDMap:
    """Inverse of export_geojson."""
    doc = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    if doc.get("type") != "FeatureCollection":
        raise InputDomainError("lane map must be a GeoJSON FeatureCollection")
    lanes = []
    for i, feature in enumerate(doc.get("features", [])):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise InputDomainError(f"feature {i}: lane geometry must be LineString")
        props = feature.get("properties") or {}
        lanes.append(
            Lane(
                id=str(props.get("id", f"lane_{i:05d}")),
                road_id=str(props.get("road_id", "")),
                lane_class=LaneClass.from_label(props.get("lane_class", "white")),
                polyline=tuple(GlobalPoint(float(x), float(y)) for x, y in geom["coordinates"]),
            )
        )
    return HDMap(lanes=lanes, frame=dict(doc.get("frame", {})), road_stats=dict(doc.get("road_stats", {})))


def roads_to_geojson(network: RoadNetwork, path: str | Path | None = None) -> dict:
    features = []
    for road in network.roads:
        props = {"id": road.id}
        if road.lane_count is not None:
            props["lanes"] = road.lane_count
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[round(p.x, 6), round(p.y, 6)] for p in road.polyline],
                },
                "properties": props,
            }
        )
    doc = {"type": "FeatureCollection", "features": features, "frame": dict(network.frame)}
    if path is not None:
        Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
    return doc


def _flatten(prefix: str, value, out: list[str]) -> None:
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], out)
    elif isinstance(value, (list, tuple)):
        out.append(f"{prefix} {json.dumps(list(value))}")
    elif isinstance(value, float):
        out.append(f"{prefix} {value:.6f}")
    elif value is None:
        out.append(f"{prefix} na")
    else:
        out.append(f"{prefix} {value}")


def report_to_dict(report: MetricsReport) -> dict:
    return dataclasses.asdict(report)


def write_report(report: MetricsReport, cfg: PipelineConfig, out_dir: str | Path) -> None:
    """Write report.json and report.txt; both embed the resolved config."""
    out = Path(out_dir)
    doc = {"config": cfg.to_dict(), "metrics": report_to_dict(report)}
    (out / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    lines: list[str] = []
    _flatten("config", doc["config"], lines)
    _flatten("", doc["metrics"], lines)
    (out / "report.txt").write_text("\n".join(lines) + "\n")


def _tile_indices(n_points: int, stride: int) -> list[int]:
    idx = list(range(0, n_points, stride))
    if idx and idx[-1] != n_points - 1:
        idx.append(n_points - 1)
    return idx


@dataclass(slots=True)
class _RoadJob:
    road_id: str
    points_per_tile: list[list[LanePoint]]
    cluster_params: DbscanParams
    image_params: DbscanParams
    dedup_cell: float
    merge_radius: float
    dp_tolerance: float


def _map_one_road(job: _RoadJob) -> tuple[str, list[Lane], dict]:
    all_points = [p for tile_points in job.points_per_tile for p in tile_points]
    clusters, noise = cluster_road_lanes(all_points, job.cluster_params, job.dedup_cell)
    graphs = [image_to_graph(tp, job.image_params) for tp in job.points_per_tile if tp]
    graph = merge_graphs(graphs, job.merge_radius)
    lanes, stats = merge_road(clusters, graph, job.dp_tolerance, job.road_id)
    stats["noise_points"] = noise
    return job.road_id, lanes, stats


class _RasterStats:
    """Accumulates raster metrics across tiles (micro-averaged)."""

    def __init__(self, image_params_px: DbscanParams):
        self.params = image_params_px
        self.agree = np.zeros(3, dtype=np.int64)
        self.total = np.zeros(3, dtype=np.int64)
        self.inter = np.zeros(3, dtype=np.int64)
        self.union = np.zeros(3, dtype=np.int64)
        self.lit = 0
        self.pixels = 0
        self.discrepancies: list[int] = []

    def add(self, pred: LaneImage, gt: LaneImage) -> None:
        pp = binarize_channels(pred.channels)
        gp = binarize_channels(gt.channels)
        npx = pp.shape[1] * pp.shape[2]
        for k in range(3):
            self.agree[k] += int(np.sum(pp[k] == gp[k]))
            self.total[k] += npx
            self.inter[k] += int(np.sum(pp[k] & gp[k]))
            self.union[k] += int(np.sum(pp[k] | gp[k]))
        self.lit += int(np.sum(gp.any(axis=0)))
        self.pixels += npx
        vs, us = np.nonzero(gp.any(axis=0))
        if len(vs):
            gt_clusters = len(dbscan(np.stack([us, vs], 1).astype(float), self.params)[0])
        else:
            gt_clusters = 0
        self.discrepancies.append(lane_count_discrepancy(pred.channels, gt_clusters, self.params))

    def fill(self, report: MetricsReport) -> None:
        if self.pixels == 0:
            return
        acc = {LaneClass(k).label: 100.0 * int(self.agree[k]) / int(self.total[k]) for k in range(3)}
        acc["total"] = sum(acc.values()) / 3.0
        report.pixel_accuracy_pct = acc
        ious = {}
        vals = []
        for k in range(3):
            if self.union[k] > 0:
                v = self.inter[k] / self.union[k]
                ious[LaneClass(k).label] = float(v)
                vals.append(v)
        if vals:
            ious["total"] = float(sum(vals) / len(vals))
            report.miou = ious
        report.lane_ratio_pct = 100.0 * self.lit / self.pixels
        report.lane_count_discrepancy = float(sum(self.discrepancies) / len(self.discrepancies))


def run_pipeline(cfg: PipelineConfig) -> tuple[HDMap, MetricsReport | None]:
    """Run every stage and write artifacts to cfg.out_dir when set."""
    cfg.validate()
    out = None
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)

    # --- Inputs -----------------------------------------------------------
    gt_map: HDMap | None = None
    if cfg.world is not None:
        network, gt_map = generate_world(cfg.world)
    else:
        network = parse_road_network(cfg.roads_path, cfg.coords, cfg.origin)
        if cfg.gt_map_path is not None:
            gt_map = import_geojson(cfg.gt_map_path)

    roads = sorted(network.roads, key=lambda r: r.id)
    road_points = {road.id: interpolate_road(road, cfg.spacing) for road in roads}

    # --- Tiles and lane images --------------------------------------------
    stride = max(1, int(round(cfg.tile_spacing / cfg.spacing)))
    tiles: list[tuple[str, str, TileSpec]] = []  # (road_id, tile_id, tile)
    for road in roads:
        pts = road_points[road.id]
        for idx in _tile_indices(len(pts), stride):
            tile = tile_for_road_point(pts[idx], cfg.pixel_size, cfg.tile_width, cfg.tile_height)
            tiles.append((road.id, f"{road.id}:{idx:05d}", tile))

    imported: dict[str, tuple[str, TileSpec]] | None = None
    if cfg.images_dir is not None:
        manifest = read_manifest(Path(cfg.images_dir) / "manifest.txt")
        imported = {tile_id: (tile_id, tile) for tile_id, tile in manifest}
        tiles = []
        for tile_id, tile in manifest:
            road_id = tile_id.rsplit(":", 1)[0]
            if road_id not in road_points:
                raise InputDomainError(f"manifest tile {tile_id!r} does not name a known road")
            tiles.append((road_id, tile_id, tile))

    gt_lane_boxes = None
    if gt_map is not None:
        gt_lane_boxes = []
        for lane in gt_map.lanes:
            xs = [p.x for p in lane.polyline]
            ys = [p.y for p in lane.polyline]
            gt_lane_boxes.append((min(xs), min(ys), max(xs), max(ys), lane))

    def lanes_near(tile: TileSpec):
        reach = math.hypot(tile.width, tile.height) * tile.pixel_size / 2.0 + 2.0
        out = []
        for x0, y0, x1, y1, lane in gt_lane_boxes:
            if (
                tile.center.x + reach >= x0
                and tile.center.x - reach <= x1
                and tile.center.y + reach >= y0
                and tile.center.y - reach <= y1
            ):
                out.append(lane)
        return out

    raster_stats = None
    if cfg.evaluate and gt_map is not None and cfg.images_dir is None:
        raster_stats = _RasterStats(DbscanParams(cfg.image_min_pts, max(cfg.image_eps / cfg.pixel_size, 1.0)))

    points_by_road: dict[str, list[list[LanePoint]]] = {road.id: [] for road in roads}
    manifest_entries: list[tuple[str, TileSpec]] = []
    soft_errors: dict[str, int] = {}
    images_out = None
    if out is not None and cfg.write_images:
        images_out = out / "images"
        images_out.mkdir(exist_ok=True)

    for ordinal, (road_id, tile_id, tile) in enumerate(tiles):
        try:
            if imported is not None:
                img = load_lane_image(Path(cfg.images_dir) / f"{tile_id.replace(':', '_')}.png", tile_id, tile)
                gt_img = None
            else:
                gt_img = render_synthetic_tile(lanes_near(tile), tile, tile_id, cfg.stroke_width)
                img = gt_img
                if cfg.corruption is not None:
                    per_tile = dataclasses.replace(cfg.corruption, seed=cfg.corruption.seed + ordinal)
                    img = corrupt(gt_img, per_tile)
            points = lane_points_from_image(img)
        except (InputDomainError, OSError):
            soft_errors[tile_id] = soft_errors.get(tile_id, 0) + 1
            continue
        points_by_road[road_id].append(points)
        if raster_stats is not None and gt_img is not None:
            raster_stats.add(img, gt_img)
        if images_out is not None:
            save_lane_image(img, images_out / f"{tile_id.replace(':', '_')}.png")
            manifest_entries.append((tile_id, tile))

    if images_out is not None:
        write_manifest(manifest_entries, images_out / "manifest.txt")

    # --- Dual mappers + fusion, per road -----------------------------------
    jobs = [
        _RoadJob(
            road_id=road.id,
            points_per_tile=points_by_road[road.id],
            cluster_params=DbscanParams(cfg.cluster_min_pts, cfg.cluster_eps),
            image_params=DbscanParams(cfg.image_min_pts, cfg.image_eps),
            dedup_cell=0.5 * cfg.pixel_size,
            merge_radius=cfg.merge_radius,
            dp_tolerance=cfg.dp_tolerance,
        )
        for road in roads
    ]
    results: dict[str, tuple[list[Lane], dict]] = {}
    try:
        if cfg.parallelism > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
                for road_id, lanes, stats in pool.map(_map_one_road, jobs):
                    results[road_id] = (lanes, stats)
        else:
            for job in jobs:
                road_id, lanes, stats = _map_one_road(job)
                results[road_id] = (lanes, stats)
    except Exception as exc:  # pragma: no cover - structural failure
        raise PipelineStageError("map", "roads", exc) from exc

    for road_id in results:
        results[road_id][1]["tile_soft_errors"] = sum(
            count for tid, count in soft_errors.items() if tid.rsplit(":", 1)[0] == road_id
        )

    hd_map = assemble_hd_map(results, network.frame)

    if out is not None:
        if cfg.world is not None:
            roads_to_geojson(network, out / "roads.geojson")
            export_geojson(gt_map, out / "gt_map.geojson")
        export_geojson(hd_map, out / "map.geojson")

    # --- Evaluation ---------------------------------------------------------
    report = None
    if cfg.evaluate and gt_map is not None:
        _, report = compute_vector_metrics(hd_map, gt_map, cfg.thresholds, cfg.match_cutoff)
        if raster_stats is not None:
            raster_stats.fill(report)
        if out is not None:
            write_report(report, cfg, out)
    return hd_map, report


def ingest_road_points(cfg: PipelineConfig, out_path: str | Path) -> int:
    """Resample roads and write a TSV of road points with local shape fits.

    Columns: road_id, index, x, y, heading, arclength, shape a, b, c, residual
    (shape columns are 'na' when the fit window is degenerate).  Returns the
    number of points written.
    """
    network = parse_road_network(cfg.roads_path, cfg.coords, cfg.origin)
    lines = ["road_id\tindex\tx\ty\theading\tarclength\ta\tb\tc\tresidual"]
    count = 0
    for road in sorted(network.roads, key=lambda r: r.id):
        pts = interpolate_road(road, cfg.spacing)
        for i, rp in enumerate(pts):
            tile = tile_for_road_point(rp, cfg.pixel_size, cfg.tile_width, cfg.tile_height)
            try:
                coeffs = fit_road_shape(rp, shape_window(rp, pts, tile))
                shape = f"{coeffs.a:.9f}\t{coeffs.b:.9f}\t{coeffs.c:.9f}\t{coeffs.residual:.9f}"
            except DegenerateFitError:
                shape = "na\tna\tna\tna"
            lines.append(
                f"{road.id}\t{i}\t{rp.position.x:.6f}\t{rp.position.y:.6f}"
                f"\t{rp.heading:.9f}\t{rp.arclength:.3f}\t{shape}"
            )
            count += 1
    Path(out_path).write_text("\n".join(lines) + "\n")
    return count
