"""Map and raster evaluation metrics.

Vector metrics match constructed lanes against ground truth one-to-one by
minimizing summed endpoint distances, then report coverage (% of gt lanes
matched), accuracy under distance thresholds, and the mean matched distance.
Raster metrics compare binarized channel planes per class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import min_assignment
from .clustering import DbscanParams, dbscan
from .errors import InputDomainError, UndefinedMetricError
from .merger import HDMap, Lane
from .raster import LaneClass, binarize_channels

DEFAULT_THRESHOLDS = (0.25, 1.0, 1.5)
DEFAULT_MATCH_CUTOFF = 10.0


@dataclass(slots=True)
class Matching:
    """One-to-one lane matching: (constructed id, gt id, distance) triples."""

    pairs: list[tuple[str, str, float]] = field(default_factory=list)
    unmatched_constructed: list[str] = field(default_factory=list)
    unmatched_gt: list[str] = field(default_factory=list)


@dataclass(slots=True)
class MetricsReport:
    counts: dict[str, int] = field(default_factory=dict)
    coverage_pct: float | None = None
    accuracy_pct: dict[str, float] = field(default_factory=dict)
    mean_vertex_distance_m: float | None = None
    pixel_accuracy_pct: dict[str, float] | None = None
    miou: dict[str, float] | None = None
    lane_ratio_pct: float | None = None
    lane_count_discrepancy: float | None = None


def lane_pair_distance(a: Lane, b: Lane) -> float:
    """Mean endpoint distance between two lanes, orientation-invariant.

    The two endpoint pairings (start-start or start-end) are both tried and
    the cheaper one is halved, so reversing either polyline changes nothing.
    """
    sa, ea = a.polyline[0], a.polyline[-1]
    sb, eb = b.polyline[0], b.polyline[-1]
    same = math.hypot(sa.x - sb.x, sa.y - sb.y) + math.hypot(ea.x - eb.x, ea.y - eb.y)
    swapped = math.hypot(sa.x - eb.x, sa.y - eb.y) + math.hypot(ea.x - sb.x, ea.y - sb.y)
    return min(same, swapped) / 2.0


def match_maps(constructed: HDMap, gt: HDMap, match_cutoff: float = DEFAULT_MATCH_CUTOFF) -> Matching:
    """Optimal one-to-one matching between constructed and gt lanes.

    Pairs farther apart than ``match_cutoff`` are demoted to unmatched.
    """
    if match_cutoff <= 0:
        raise InputDomainError(f"match_cutoff must be positive, got {match_cutoff}")
    cl, gl = constructed.lanes, gt.lanes
    if not cl or not gl:
        return Matching(
            pairs=[],
            unmatched_constructed=sorted(l.id for l in cl),
            unmatched_gt=sorted(l.id for l in gl),
        )
    values = np.empty((len(cl), len(gl)))
    for i, a in enumerate(cl):
        for j, b in enumerate(gl):
            values[i, j] = lane_pair_distance(a, b)
    perm = min_assignment(values)
    pairs = []
    used_c: set[int] = set()
    used_g: set[int] = set()
    for i, j in perm.pairs:
        d = float(values[i, j])
        if d <= match_cutoff:
            pairs.append((cl[i].id, gl[j].id, d))
            used_c.add(i)
            used_g.add(j)
    pairs.sort(key=lambda p: p[0])
    return Matching(
        pairs=pairs,
        unmatched_constructed=sorted(cl[i].id for i in range(len(cl)) if i not in used_c),
        unmatched_gt=sorted(gl[j].id for j in range(len(gl)) if j not in used_g),
    )


def map_coverage(matching: Matching, gt_count: int) -> float:
    """Percentage of gt lanes that found a match."""
    if gt_count < 1:
        raise UndefinedMetricError("coverage undefined for empty ground truth")
    return 100.0 * len(matching.pairs) / gt_count


def map_accuracy(matching: Matching, threshold: float, gt_count: int) -> float:
    """Percentage of gt lanes matched strictly closer than ``threshold`` meters."""
    if threshold <= 0:
        raise InputDomainError(f"threshold must be positive, got {threshold}")
    if gt_count < 1:
        raise UndefinedMetricError("accuracy undefined for empty ground truth")
    return 100.0 * sum(1 for _, _, d in matching.pairs if d < threshold) / gt_count


def mean_vertex_distance(matching: Matching) -> float:
    """Mean distance over matched pairs."""
    if not matching.pairs:
        raise UndefinedMetricError("mean distance undefined without matched pairs")
    return sum(d for _, _, d in matching.pairs) / len(matching.pairs)


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise InputDomainError(f"image shapes differ: {pred.shape} vs {gt.shape}")
    return pred, gt


def pixel_accuracy(pred: np.ndarray, gt: np.ndarray) -> dict[str, float]:
    """Per-class binarized pixel agreement (percent), plus the class mean as 'total'."""
    pred, gt = _check_pair(pred, gt)
    pp = binarize_channels(pred)
    gp = binarize_channels(gt)
    out: dict[str, float] = {}
    total = pp.shape[1] * pp.shape[2]
    for k in range(3):
        agree = int(np.sum(pp[k] == gp[k]))
        out[LaneClass(k).label] = 100.0 * agree / total
    out["total"] = sum(out[LaneClass(k).label] for k in range(3)) / 3.0
    return out


def miou(pred: np.ndarray, gt: np.ndarray) -> dict[str, float]:
    """Per-class intersection over union of binarized planes.

    Classes absent from both images are excluded; 'total' is the mean of the
    defined classes.  Raises when no class is present at all.
    """
    pred, gt = _check_pair(pred, gt)
    pp = binarize_channels(pred)
    gp = binarize_channels(gt)
    out: dict[str, float] = {}
    defined = []
    for k in range(3):
        union = int(np.sum(pp[k] | gp[k]))
        if union == 0:
            continue
        inter = int(np.sum(pp[k] & gp[k]))
        val = inter / union
        out[LaneClass(k).label] = val
        defined.append(val)
    if not defined:
        raise UndefinedMetricError("IoU undefined: no class present in either image")
    out["total"] = sum(defined) / len(defined)
    return out


def lane_pixel_ratio(channels: np.ndarray) -> float:
    """Percentage of pixels carrying any lane class after binarization."""
    planes = binarize_channels(channels)
    total = planes.shape[1] * planes.shape[2]
    return 100.0 * int(np.sum(planes.any(axis=0))) / total


def lane_count_discrepancy(pred: np.ndarray, gt_lane_count: int, params: DbscanParams) -> int:
    """|number of pixel-space clusters in pred - gt lane count|.

    Clustering runs on the lit pixel coordinates (u, v), so ``params.eps`` is
    in pixels here.
    """
    if gt_lane_count < 0:
        raise InputDomainError(f"gt_lane_count must be >= 0, got {gt_lane_count}")
    planes = binarize_channels(np.asarray(pred))
    vs, us = np.nonzero(planes.any(axis=0))
    if len(vs) == 0:
        clusters = 0
    else:
        coords = np.stack([us, vs], axis=1).astype(float)
        member_lists, _ = dbscan(coords, params)
        clusters = len(member_lists)
    return abs(clusters - gt_lane_count)


def compute_vector_metrics(
    constructed: HDMap,
    gt: HDMap,
    thresholds=DEFAULT_THRESHOLDS,
    match_cutoff: float = DEFAULT_MATCH_CUTOFF,
) -> tuple[Matching, MetricsReport]:
    """Match the maps and fill the vector-metric side of a report.

    Metrics that are undefined (empty gt, no matches) come back as None
    rather than raising, so empty runs still produce a complete report.
    """
    matching = match_maps(constructed, gt, match_cutoff)
    report = MetricsReport(
        counts={
            "constructed_lanes": len(constructed.lanes),
            "gt_lanes": len(gt.lanes),
            "matched_lanes": len(matching.pairs),
        }
    )
    if gt.lanes:
        report.coverage_pct = map_coverage(matching, len(gt.lanes))
        for th in thresholds:
            report.accuracy_pct[f"{th:g}"] = map_accuracy(matching, th, len(gt.lanes))
    if matching.pairs:
        report.mean_vertex_distance_m = mean_vertex_distance(matching)
    return matching, report
