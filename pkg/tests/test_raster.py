"""Lane image semantics: binarization, extraction, rendering, corruption, IO.

Rendering oracle for the frozen cases: a lane along the tile heading through
the center projects to the center row (v = 128), covering every column, so a
clean 256-wide tile lights exactly 256 pixels.

Blur oracle: a single 1.0 pixel with a radius-1 box blur and zero padding
averages over a 3x3 window twice separably: the row [0, 1, 0] becomes
[1/9, 1/9, 1/9] on a 1x3 image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pytest

from lanemap.errors import InputDomainError
from lanemap.geometry import GlobalPoint, TileSpec
from lanemap.raster import (
    CorruptionParams,
    LaneClass,
    LaneImage,
    _box_blur,
    _dilate,
    binarize_channels,
    corrupt,
    extract_lane_pixels,
    lane_points_from_image,
    load_lane_image,
    read_manifest,
    render_synthetic_tile,
    save_lane_image,
    write_manifest,
)


@dataclass
class _GtLane:
    polyline: tuple
    lane_class: LaneClass


def _tile(x=0.0, y=0.0, heading=0.0) -> TileSpec:
    return TileSpec(center=GlobalPoint(x, y), heading=heading)


def _lane_along(tile: TileSpec, offset=0.0, lane_class=LaneClass.WHITE) -> _GtLane:
    c, s = math.cos(tile.heading), math.sin(tile.heading)
    cx, cy = tile.center.x - offset * s, tile.center.y + offset * c
    half = tile.width * tile.pixel_size / 2.0
    return _GtLane(
        (GlobalPoint(cx - half * c, cy - half * s), GlobalPoint(cx + half * c, cy + half * s)),
        lane_class,
    )


# --- lane classes -------------------------------------------------------------

def test_lane_class_labels_round_trip():
    for cls in LaneClass:
        assert LaneClass.from_label(cls.label) is cls
    assert LaneClass.from_label("YELLOW") is LaneClass.YELLOW
    with pytest.raises(InputDomainError):
        LaneClass.from_label("green")


# --- binarization ---------------------------------------------------------------

def test_binarize_threshold_and_ties():
    ch = np.zeros((3, 1, 4), dtype=np.float32)
    ch[1, 0, 0] = 0.5      # at threshold: lit
    ch[2, 0, 1] = 0.49     # below: dark
    ch[0, 0, 2] = 0.8      # clear winner
    ch[1, 0, 3] = 0.7      # tie 0.7 vs 0.7: lowest class index wins
    ch[2, 0, 3] = 0.7
    planes = binarize_channels(ch)
    assert planes[1, 0, 0] and not planes[0, 0, 0] and not planes[2, 0, 0]
    assert not planes[:, 0, 1].any()
    assert planes[0, 0, 2]
    assert planes[1, 0, 3] and not planes[2, 0, 3]


def test_binarize_rejects_bad_shape():
    with pytest.raises(InputDomainError):
        binarize_channels(np.zeros((2, 4, 4)))


def test_extract_lane_pixels_row_major_order():
    ch = np.zeros((3, 4, 4), dtype=np.float32)
    ch[2, 3, 0] = 1.0
    ch[0, 1, 2] = 1.0
    ch[1, 1, 1] = 1.0
    img = LaneImage("t", TileSpec(GlobalPoint(0, 0), 0.0, 0.25, 4, 4), ch)
    got = [(p.u, p.v, cls) for p, cls in extract_lane_pixels(img)]
    assert got == [(1, 1, LaneClass.WHITE), (2, 1, LaneClass.BROKEN_WHITE), (0, 3, LaneClass.YELLOW)]


# --- rendering -------------------------------------------------------------------

def test_render_lane_through_center_hits_center_row():
    tile = _tile()
    img = render_synthetic_tile([_lane_along(tile)], tile, "t:0")
    lit = binarize_channels(img.channels)
    assert int(lit.sum()) == 256
    vs, us = np.nonzero(lit[int(LaneClass.WHITE)])
    assert set(vs) == {128}
    assert set(us) == set(range(256))


def test_render_center_row_rule_holds_under_rotation():
    tile = _tile(50.0, -20.0, heading=0.77)
    img = render_synthetic_tile([_lane_along(tile)], tile, "t:0")
    vs, us = np.nonzero(binarize_channels(img.channels)[int(LaneClass.WHITE)])
    assert set(vs) == {128}
    assert len(us) == 256


def test_render_offset_lane_moves_rows_not_columns():
    tile = _tile()
    img = render_synthetic_tile([_lane_along(tile, offset=2.0)], tile, "t:0")
    vs, _ = np.nonzero(binarize_channels(img.channels)[int(LaneClass.WHITE)])
    # +2 m to the left of the heading is 8 pixels up from the center row.
    assert set(vs) == {120}


def test_render_translation_equivariance():
    # Shifting lane and tile together by whole meters reproduces the image.
    lane = _GtLane((GlobalPoint(-30.0, 1.0), GlobalPoint(30.0, 1.3)), LaneClass.YELLOW)
    img_a = render_synthetic_tile([lane], _tile(), "a")
    shift = GlobalPoint(1234.0, -87.0)
    moved = _GtLane(
        tuple(GlobalPoint(p.x + shift.x, p.y + shift.y) for p in lane.polyline), lane.lane_class
    )
    img_b = render_synthetic_tile([moved], _tile(shift.x, shift.y), "b")
    assert np.array_equal(img_a.channels, img_b.channels)


def test_render_clips_to_tile():
    tile = _tile()
    far = _GtLane((GlobalPoint(500.0, 0.0), GlobalPoint(600.0, 0.0)), LaneClass.WHITE)
    img = render_synthetic_tile([far], tile, "t")
    assert not img.channels.any()


def test_render_stroke_width_dilates():
    tile = _tile()
    thin = render_synthetic_tile([_lane_along(tile)], tile, "t", stroke_width=1)
    thick = render_synthetic_tile([_lane_along(tile)], tile, "t", stroke_width=3)
    n_thin = int(binarize_channels(thin.channels).sum())
    n_thick = int(binarize_channels(thick.channels).sum())
    assert n_thin == 256 and n_thick == 3 * 256
    with pytest.raises(InputDomainError):
        render_synthetic_tile([], tile, "t", stroke_width=0)


def test_dilate_matches_naive_shift_or():
    rng = np.random.default_rng(21)
    for width in (1, 2, 3, 5):
        mask = rng.random((20, 17)) < 0.1
        lo, hi = -((width - 1) // 2), width // 2
        naive = np.zeros_like(mask)
        h, w = mask.shape
        for v in range(h):
            for u in range(w):
                if not mask[v, u]:
                    continue
                for dv in range(lo, hi + 1):
                    for du in range(lo, hi + 1):
                        if 0 <= v + dv < h and 0 <= u + du < w:
                            naive[v + dv, u + du] = True
        assert np.array_equal(_dilate(mask, width), naive)


# --- global extraction -----------------------------------------------------------

def test_lane_points_round_trip_through_rendering():
    tile = _tile(10.0, 20.0, heading=0.4)
    img = render_synthetic_tile([_lane_along(tile, offset=1.0)], tile, "t:9")
    points = lane_points_from_image(img)
    assert len(points) == 256
    assert all(p.lane_class is LaneClass.WHITE for p in points)
    assert all(p.source[0] == "t:9" for p in points)
    # Every recovered global point sits within half a pixel diagonal of the lane line.
    c, s = math.cos(tile.heading), math.sin(tile.heading)
    for p in points:
        dx, dy = p.position.x - tile.center.x, p.position.y - tile.center.y
        lateral = -s * dx + c * dy
        assert abs(lateral - 1.0) <= 0.5 * tile.pixel_size * math.sqrt(2.0)


def test_lane_points_empty_image():
    img = LaneImage("t", _tile(), np.zeros((3, 256, 256), dtype=np.float32))
    assert lane_points_from_image(img) == []


# --- corruption -------------------------------------------------------------------

def test_corruption_params_validation():
    with pytest.raises(InputDomainError):
        CorruptionParams(dropout=1.5)
    with pytest.raises(InputDomainError):
        CorruptionParams(jitter_sigma=-1.0)
    with pytest.raises(InputDomainError):
        CorruptionParams(blur_radius=-1)


def test_dropout_removes_exact_fraction():
    tile = _tile()
    img = render_synthetic_tile([_lane_along(tile)], tile, "t")
    out = corrupt(img, CorruptionParams(dropout=0.25, seed=5))
    assert int(binarize_channels(out.channels).sum()) == 256 - 64
    # Input image untouched.
    assert int(binarize_channels(img.channels).sum()) == 256


def test_corrupt_deterministic_for_seed():
    tile = _tile()
    img = render_synthetic_tile([_lane_along(tile, offset=-1.5)], tile, "t")
    params = CorruptionParams(dropout=0.3, jitter_sigma=1.0, blur_radius=1, seed=42)
    a = corrupt(img, params)
    b = corrupt(img, params)
    assert np.array_equal(a.channels, b.channels)
    c = corrupt(img, CorruptionParams(dropout=0.3, jitter_sigma=1.0, blur_radius=1, seed=43))
    assert not np.array_equal(a.channels, c.channels)


def test_jitter_never_creates_pixels():
    tile = _tile()
    img = render_synthetic_tile([_lane_along(tile)], tile, "t")
    out = corrupt(img, CorruptionParams(jitter_sigma=2.0, seed=1))
    assert int(binarize_channels(out.channels).sum()) <= 256


def test_box_blur_frozen_single_pixel():
    ch = np.zeros((3, 1, 3), dtype=np.float32)
    ch[0, 0, 1] = 1.0
    out = _box_blur(ch, 1)
    np.testing.assert_allclose(out[0], [[1 / 9, 1 / 9, 1 / 9]], atol=1e-6)
    assert not out[1].any() and not out[2].any()


def test_noop_corruption_returns_equal_image():
    tile = _tile()
    img = render_synthetic_tile([_lane_along(tile)], tile, "t")
    out = corrupt(img, CorruptionParams())
    assert np.array_equal(out.channels, img.channels)


# --- image and manifest IO ---------------------------------------------------------

def test_lane_image_validation():
    tile = _tile()
    with pytest.raises(InputDomainError):
        LaneImage("t", tile, np.zeros((3, 8, 8), dtype=np.float32))
    bad = np.zeros((3, 256, 256), dtype=np.float32)
    bad[0, 0, 0] = 1.5
    with pytest.raises(InputDomainError):
        LaneImage("t", tile, bad)


def test_png_round_trip_exact_for_clean_images(tmp_path):
    tile = _tile(3.0, 4.0, heading=1.1)
    img = render_synthetic_tile([_lane_along(tile, offset=0.5, lane_class=LaneClass.YELLOW)], tile, "t:3")
    path = tmp_path / "t_3.png"
    save_lane_image(img, path)
    back = load_lane_image(path, "t:3", tile)
    assert np.array_equal(back.channels, img.channels)


def test_manifest_round_trip_lossless(tmp_path):
    entries = [
        ("road_000:00000", _tile(1.0, 2.0, heading=math.pi / 6)),
        ("road_000:00016", TileSpec(GlobalPoint(-7.25, 0.125), -2.5, 0.125, 128, 64)),
    ]
    path = tmp_path / "manifest.txt"
    write_manifest(entries, path)
    back = read_manifest(path)
    assert back == entries


def test_manifest_rejects_bad_tile_ids(tmp_path):
    with pytest.raises(InputDomainError):
        write_manifest([("has space", _tile())], tmp_path / "m.txt")
    with pytest.raises(InputDomainError):
        write_manifest([("", _tile())], tmp_path / "m.txt")
    (tmp_path / "short.txt").write_text("only three fields\n")
    with pytest.raises(InputDomainError):
        read_manifest(tmp_path / "short.txt")
