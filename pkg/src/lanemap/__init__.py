"""Lane-level HD map construction from road centerlines and rasterized lane tiles."""

from .assignment import Permutation, WeightMatrix, max_assignment, min_assignment
from .clustering import (
    IMAGE_CLUSTER_PARAMS,
    ROAD_CLUSTER_PARAMS,
    DbscanParams,
    LaneCluster,
    cluster_road_lanes,
    dbscan,
)
from .geometry import (
    GlobalPoint,
    PixelCoord,
    TileSpec,
    global_to_pixel,
    in_tile_footprint,
    pixel_to_global,
)
from .lane_graph import Edge, LaneGraph, Vertex, farthest_pair, image_to_graph, merge_graphs
from .merger import (
    HDMap,
    Lane,
    assemble_hd_map,
    cluster_only_lanes,
    merge_road,
    sharing_matrix,
    simplify_polyline,
)
from .metrics import (
    Matching,
    MetricsReport,
    compute_vector_metrics,
    lane_count_discrepancy,
    lane_pair_distance,
    map_accuracy,
    map_coverage,
    match_maps,
    mean_vertex_distance,
    miou,
    pixel_accuracy,
)
from .pipeline import PipelineConfig, export_geojson, import_geojson, run_pipeline
from .raster import (
    CorruptionParams,
    LaneClass,
    LaneImage,
    LanePoint,
    corrupt,
    extract_lane_pixels,
    lane_points_from_image,
    render_synthetic_tile,
)
from .roads import (
    Road,
    RoadNetwork,
    RoadPoint,
    ShapeCoeffs,
    fit_road_shape,
    interpolate_road,
    parse_road_network,
    tile_for_road_point,
)
from .synth import SyntheticWorldSpec, generate_world

__version__ = "0.1.0"
