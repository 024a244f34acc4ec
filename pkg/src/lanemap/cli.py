"""Command-line entry points.

    lanemap synth   --out-dir out --roads-n 20 --seed 7
    lanemap ingest  --roads out/roads.geojson --out out/road_points.tsv
    lanemap extract --roads out/roads.geojson --gt-map out/gt_map.geojson --out-dir out
    lanemap map     --roads out/roads.geojson --images out/images --out-dir out
    lanemap eval    --map out/map.geojson --gt-map out/gt_map.geojson --out-dir out
    lanemap export  --map out/map.geojson --out normalized.geojson
    lanemap run     --config config.json

``run`` executes everything end to end from a JSON config; individual
subcommands expose the stages for file-level composition.  Flags override
config file values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .pipeline import (
    PipelineConfig,
    export_geojson,
    import_geojson,
    ingest_road_points,
    run_pipeline,
    write_report,
)
from .raster import CorruptionParams
from .metrics import compute_vector_metrics
from .synth import SyntheticWorldSpec, generate_world


def _base_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_file(args.config) if getattr(args, "config", None) else PipelineConfig()
    for key in (
        "out_dir",
        "roads_path",
        "gt_map_path",
        "images_dir",
        "coords",
        "seed",
        "spacing",
        "pixel_size",
        "tile_spacing",
        "tile_width",
        "tile_height",
        "stroke_width",
        "cluster_eps",
        "cluster_min_pts",
        "image_eps",
        "image_min_pts",
        "merge_radius",
        "dp_tolerance",
        "match_cutoff",
        "parallelism",
    ):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "no_eval", False):
        cfg.evaluate = False
    if getattr(args, "write_images", False):
        cfg.write_images = True
    dropout = getattr(args, "dropout", None)
    jitter = getattr(args, "jitter", None)
    blur = getattr(args, "blur", None)
    if any(v is not None for v in (dropout, jitter, blur)):
        base = cfg.corruption or CorruptionParams(seed=cfg.seed)
        cfg.corruption = dataclasses.replace(
            base,
            dropout=dropout if dropout is not None else base.dropout,
            jitter_sigma=jitter if jitter is not None else base.jitter_sigma,
            blur_radius=blur if blur is not None else base.blur_radius,
        )
    return cfg


def _world_from_args(args, seed: int) -> SyntheticWorldSpec:
    return SyntheticWorldSpec(
        n_roads=args.roads_n,
        lanes_min=args.lanes_min,
        lanes_max=args.lanes_max,
        curvature_max=args.curvature_max,
        lane_spacing=args.lane_spacing,
        extent=args.extent,
        y_fixture=not args.no_y_fixture,
        uturn_fixture=not args.no_uturn_fixture,
        seed=seed,
    )


def cmd_synth(args) -> int:
    cfg = _base_config(args)
    out = Path(cfg.out_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    spec = _world_from_args(args, cfg.seed)
    from .pipeline import roads_to_geojson

    network, gt_map = generate_world(spec)
    roads_to_geojson(network, out / "roads.geojson")
    export_geojson(gt_map, out / "gt_map.geojson")
    (out / "world.json").write_text(
        json.dumps(PipelineConfig(world=spec).to_dict()["world"], sort_keys=True, indent=2) + "\n"
    )
    print(f"synth: {len(network.roads)} roads, {len(gt_map.lanes)} gt lanes -> {out}")
    return 0


def cmd_ingest(args) -> int:
    cfg = _base_config(args)
    if cfg.roads_path is None:
        print("ingest: --roads is required", file=sys.stderr)
        return 2
    n = ingest_road_points(cfg, args.out)
    print(f"ingest: wrote {n} road points -> {args.out}")
    return 0


def cmd_extract(args) -> int:
    cfg = _base_config(args)
    if cfg.roads_path is None or cfg.gt_map_path is None:
        print("extract: --roads and --gt-map are required", file=sys.stderr)
        return 2
    cfg.write_images = True
    cfg.evaluate = False
    run_pipeline(cfg)
    print(f"extract: images + manifest -> {Path(cfg.out_dir or '.') / 'images'}")
    return 0


def cmd_map(args) -> int:
    cfg = _base_config(args)
    if cfg.roads_path is None or cfg.images_dir is None:
        print("map: --roads and --images are required", file=sys.stderr)
        return 2
    cfg.evaluate = cfg.gt_map_path is not None
    hd_map, _ = run_pipeline(cfg)
    print(f"map: {len(hd_map.lanes)} lanes -> {Path(cfg.out_dir or '.') / 'map.geojson'}")
    return 0


def cmd_eval(args) -> int:
    cfg = _base_config(args)
    constructed = import_geojson(args.map)
    gt = import_geojson(cfg.gt_map_path)
    _, report = compute_vector_metrics(constructed, gt, cfg.thresholds, cfg.match_cutoff)
    out = Path(cfg.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, cfg, out)
    cov = "na" if report.coverage_pct is None else f"{report.coverage_pct:.2f}"
    print(f"eval: coverage {cov}% over {report.counts['gt_lanes']} gt lanes -> {out / 'report.txt'}")
    return 0


def cmd_export(args) -> int:
    hd_map = import_geojson(args.map)
    export_geojson(hd_map, args.out)
    print(f"export: {len(hd_map.lanes)} lanes -> {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = _base_config(args)
    if cfg.out_dir is None:
        cfg.out_dir = "out"
    hd_map, report = run_pipeline(cfg)
    msg = f"run: {len(hd_map.lanes)} lanes"
    if report is not None and report.coverage_pct is not None:
        msg += f", coverage {report.coverage_pct:.2f}%"
        if report.mean_vertex_distance_m is not None:
            msg += f", mean distance {report.mean_vertex_distance_m:.3f} m"
    print(msg + f" -> {cfg.out_dir}")
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--seed", type=int)


def _add_tile_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spacing", type=float, help="road point spacing, m")
    p.add_argument("--tile-spacing", dest="tile_spacing", type=float, help="tile stride along the road, m")
    p.add_argument("--pixel-size", dest="pixel_size", type=float)
    p.add_argument("--tile-width", dest="tile_width", type=int)
    p.add_argument("--tile-height", dest="tile_height", type=int)


def _add_mapper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cluster-eps", dest="cluster_eps", type=float)
    p.add_argument("--cluster-min-pts", dest="cluster_min_pts", type=int)
    p.add_argument("--image-eps", dest="image_eps", type=float)
    p.add_argument("--image-min-pts", dest="image_min_pts", type=int)
    p.add_argument("--merge-radius", dest="merge_radius", type=float)
    p.add_argument("--dp-tolerance", dest="dp_tolerance", type=float)
    p.add_argument("--parallelism", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lanemap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic world (roads + gt lanes)")
    _add_common(p)
    p.add_argument("--roads-n", dest="roads_n", type=int, default=20)
    p.add_argument("--lanes-min", dest="lanes_min", type=int, default=2)
    p.add_argument("--lanes-max", dest="lanes_max", type=int, default=4)
    p.add_argument("--curvature-max", dest="curvature_max", type=float, default=0.003)
    p.add_argument("--lane-spacing", dest="lane_spacing", type=float, default=3.5)
    p.add_argument("--extent", type=float, default=2400.0)
    p.add_argument("--no-y-fixture", dest="no_y_fixture", action="store_true")
    p.add_argument("--no-uturn-fixture", dest="no_uturn_fixture", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="resample roads, fit local shapes, write road_points.tsv")
    _add_common(p)
    p.add_argument("--roads", dest="roads_path")
    p.add_argument("--coords", choices=["planar", "lonlat"])
    p.add_argument("--out", default="road_points.tsv")
    p.add_argument("--spacing", type=float)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="render gt lane images per tile + manifest")
    _add_common(p)
    p.add_argument("--roads", dest="roads_path")
    p.add_argument("--gt-map", dest="gt_map_path")
    _add_tile_flags(p)
    p.add_argument("--dropout", type=float)
    p.add_argument("--jitter", type=float)
    p.add_argument("--blur", type=int)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("map", help="construct the lane map from images + roads")
    _add_common(p)
    p.add_argument("--roads", dest="roads_path")
    p.add_argument("--images", dest="images_dir")
    p.add_argument("--gt-map", dest="gt_map_path")
    _add_tile_flags(p)
    _add_mapper_flags(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("eval", help="compare a lane map against ground truth")
    _add_common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--gt-map", dest="gt_map_path", required=True)
    p.add_argument("--match-cutoff", dest="match_cutoff", type=float)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="normalize a lane map file (import + re-export)")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("run", help="full pipeline from a config file")
    _add_common(p)
    p.add_argument("--roads", dest="roads_path")
    p.add_argument("--gt-map", dest="gt_map_path")
    p.add_argument("--images", dest="images_dir")
    _add_tile_flags(p)
    _add_mapper_flags(p)
    p.add_argument("--stroke-width", dest="stroke_width", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--jitter", type=float)
    p.add_argument("--blur", type=int)
    p.add_argument("--no-eval", dest="no_eval", action="store_true")
    p.add_argument("--write-images", dest="write_images", action="store_true")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
