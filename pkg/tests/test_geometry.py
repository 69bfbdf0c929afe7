import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ellipse_arc, line_pixels
from geoprim.benchmark import boundary_pixels
from geoprim.contours import EdgeContour
from geoprim.ellipse import EllipseParams
from geoprim.geometry import (
    OUT_OF_REGION,
    BinGrid,
    DegenerateTangentError,
    InvalidCenterError,
    Line,
    NoRegionError,
    associated_convexity,
    associated_convexity_many,
    bin_of_point,
    center_from_triplet,
    centers_from_triplets,
    edges_in_search_region,
    estimate_tangent,
    search_region,
    tangent_directions,
)
from geoprim.hypotheses import edge_rng, sample_triplets


def tangent_line(e: EllipseParams, t: float) -> Line:
    return Line.from_point_direction(e.point_at(t), e.tangent_at(t))


def test_line_normalised_and_vertical():
    l = Line.through((3, 0), (3, 10))
    assert math.isclose(l.A ** 2 + l.B ** 2, 1.0)
    assert abs(l.B) < 1e-15
    assert math.isclose(abs(l.signed_distance([5, 2])), 2.0)


def test_tangent_horizontal_run():
    e = EdgeContour(line_pixels(1, 5, 30, 5))
    t = estimate_tangent(e, 10)
    assert abs(t.direction[1]) < 1e-12
    assert math.isclose(t.signed_distance(e.pixels[10]), 0.0, abs_tol=1e-12)


def test_tangent_on_circle_at_45_degrees():
    circle = EllipseParams.make(150, 150, 100, 100, 0)
    px = boundary_pixels(circle)
    e = EdgeContour(px, closed=True)
    loc = px - 150
    i = int(np.argmin(np.abs(np.arctan2(loc[:, 1], loc[:, 0]) - math.pi / 4)))
    dx, dy = estimate_tangent(e, i, 3).direction
    assert abs(dy / dx - (-1.0)) < 0.1


def test_tangent_short_contour_uses_whole_chord():
    px = np.array([[1, 1], [2, 1], [3, 2], [4, 2], [5, 3], [6, 3]])
    e = EdgeContour(px)
    chord = px[-1] - px[0]
    for i in range(len(px)):
        d = np.array(estimate_tangent(e, i, 3).direction)
        assert abs(d[0] * chord[1] - d[1] * chord[0]) < 1e-12


def test_tangent_degenerate():
    # the chain doubles back, so P[i-p] == P[i+p]
    px = np.array([[1, 1], [2, 1], [3, 1], [4, 1], [3, 2], [2, 1], [1, 1]])
    with pytest.raises(DegenerateTangentError):
        estimate_tangent(EdgeContour(px), 3, 3)


def test_tangent_directions_matches_scalar(rng):
    e = EdgeContour(boundary_pixels(EllipseParams.make(150, 150, 80, 40, 0.4))[:150])
    dirs, ok = tangent_directions(e, 3)
    assert ok.all()
    for i in range(len(e)):
        d = estimate_tangent(e, i, 3).direction
        assert np.allclose(d, dirs[i], atol=1e-12)


def test_center_circle_example():
    P = [(10, 0), (0, 10), (-10, 0)]
    t = [Line.from_point_direction((10, 0), (0, 1)), Line.from_point_direction((0, 10), (1, 0)),
         Line.from_point_direction((-10, 0), (0, 1))]
    assert np.allclose(center_from_triplet(*P, *t), (0, 0), atol=1e-12)


def test_center_ellipse_example():
    e = EllipseParams.make(0, 0, 20, 10, 0)
    ts = [math.radians(v) for v in (20, 100, 200)]
    c = center_from_triplet(*(e.point_at(t) for t in ts), *(tangent_line(e, t) for t in ts))
    assert np.allclose(c, (0, 0), atol=1e-9)


def test_center_parallel_tangent_cases():
    # t1 parallel to t3 is fine: only consecutive pairs are intersected
    P = [(10, 0), (0, 10), (-10, 0)]
    vert = lambda p: Line.from_point_direction(p, (0, 1))
    center_from_triplet(*P, vert(P[0]), Line.from_point_direction(P[1], (1, 0)), vert(P[2]))
    with pytest.raises(InvalidCenterError):
        center_from_triplet(*P, vert(P[0]), vert(P[1]), Line.from_point_direction(P[2], (1, 1)))


def test_center_collinear_construction_lines():
    P = [(0, 0), (10, 0), (20, 0)]
    t = [Line.from_point_direction(P[0], (1, 1)), Line.from_point_direction(P[1], (1, -1)),
         Line.from_point_direction(P[2], (1, 1))]
    with pytest.raises(InvalidCenterError):
        center_from_triplet(*P, *t)
    _, valid = centers_from_triplets(np.array([P], float), np.array([[(1, 1), (1, -1), (1, 1)]]) / math.sqrt(2))
    assert not valid[0]


def random_exact_triplets(rng, n):
    cases = []
    for _ in range(n):
        b, a = np.sort(rng.uniform(5, 200, 2))
        e = EllipseParams.make(*rng.uniform(-300, 300, 2), a, b, rng.uniform(0, math.pi))
        ts = rng.uniform(0, 2 * math.pi / 3, 3) + np.array([0, 2, 4]) * math.pi / 3
        cases.append((e, ts))
    return cases


def test_center_exact_on_conic_data(rng):
    worst = 0.0
    P, D, truth = [], [], []
    for e, ts in random_exact_triplets(rng, 1000):
        pts = [e.point_at(t) for t in ts]
        c = center_from_triplet(*pts, *(tangent_line(e, t) for t in ts))
        worst = max(worst, math.hypot(c[0] - e.x, c[1] - e.y))
        tan = np.array([e.tangent_at(t) for t in ts])
        P.append(pts)
        D.append(tan / np.linalg.norm(tan, axis=1)[:, None])
        truth.append((e.x, e.y))
    assert worst < 1e-6
    centers, valid = centers_from_triplets(np.array(P), np.array(D))
    assert valid.all()
    assert np.abs(centers - np.array(truth)).max() < 1e-6


def test_bin_examples():
    grid = BinGrid(300, 300, 30, 30)
    assert bin_of_point((1, 1), grid) == 1
    assert bin_of_point((300, 300), grid) == 100
    assert bin_of_point((31, 1), grid) == 2
    assert bin_of_point((0, 5), grid) == OUT_OF_REGION
    assert bin_of_point((301, 5), grid) == OUT_OF_REGION


def test_bins_are_a_bijection_on_cells():
    grid = BinGrid(30, 30, 3, 3)
    ys, xs = np.mgrid[1:31, 1:31]
    bins = grid.bins_of(np.stack([xs.ravel(), ys.ravel()], axis=1)).reshape(30, 30)
    assert set(bins.ravel()) == set(range(1, 101))
    for b in range(1, 101):
        rows, cols = np.nonzero(bins == b)
        assert rows.max() - rows.min() == 2 and cols.max() - cols.min() == 2
        assert len(rows) == 9


def test_bin_window():
    grid = BinGrid.for_image(300, 300, 10)
    ref = bin_of_point((150, 150), grid)
    assert grid.in_window(ref, bin_of_point((170, 130), grid), 5)
    assert not grid.in_window(ref, bin_of_point((180, 150), grid), 5)
    assert not grid.in_window(ref, OUT_OF_REGION, 5)


def test_raster_triplets_land_near_true_center(rng):
    grid = BinGrid.for_image(300, 300, 10)
    inside = total = 0
    for k in range(40):
        b, a = np.sort(rng.uniform(20, 120, 2))
        e = EllipseParams.make(150 + rng.uniform(-20, 20), 150 + rng.uniform(-20, 20), a, b, rng.uniform(0, math.pi))
        c = EdgeContour(boundary_pixels(e), closed=True)
        tri = sample_triplets(c, 200, edge_rng(7, k))
        dirs, ok = tangent_directions(c, 3)
        centers, valid = centers_from_triplets(c.pixels[tri].astype(float), dirs[tri])
        valid &= ok[tri].all(axis=1)
        ref = bin_of_point((e.x, e.y), grid)
        bins = grid.bins_of(centers[valid])
        inside += sum(grid.in_window(ref, int(bb), 5) for bb in bins)
        total += int(valid.sum())
    assert inside / total >= 0.8


CIRCLE = EllipseParams.make(150, 150, 40, 40, 0)


def upper_semicircle():
    # image y grows downward; "upper" = smaller y
    return ellipse_arc(CIRCLE, math.pi, 2 * math.pi)


def test_semicircle_region():
    e = upper_semicircle()
    reg = search_region(e)
    first, last = e.pixels[0], e.pixels[-1]
    assert abs(first[1] - 150) <= 1 and abs(last[1] - 150) <= 1
    assert abs(reg.p_mid[0] - 150) <= 2 and abs(reg.p_mid[1] - 110) <= 1
    assert reg.pixel_mask(np.array([reg.p_mid])).sum() == 0  # p_mid is on the excluded side of l3
    assert reg.pixel_mask(np.array([[150.0, 170.0]]))[0]
    assert not reg.pixel_mask(np.array([[150.0, 130.0]]))[0]


def test_region_opposite_half_passes_and_lens_fails():
    reg = search_region(upper_semicircle())
    lower = ellipse_arc(CIRCLE, 0.15, math.pi - 0.15, cid=1)
    assert edges_in_search_region(reg, [lower]) == [lower]
    lens = EdgeContour(line_pixels(140, 140, 160, 140), id=2)
    assert edges_in_search_region(reg, [lens]) == []
    outside = EdgeContour(line_pixels(200, 160, 200, 180), id=3)
    assert edges_in_search_region(reg, [outside]) == []


def test_quarter_arc_region():
    e = ellipse_arc(CIRCLE, 0, math.pi / 2)
    reg = search_region(e)
    d1, d2 = np.array(reg.l1.direction), np.array(reg.l2.direction)
    ang = math.degrees(math.acos(abs(d1 @ d2)))
    assert abs(ang - 90) < 10
    assert reg.pixel_mask(np.array([[150.0 - 20, 150.0 - 20]]))[0]


def test_near_straight_region_is_well_defined():
    big = EllipseParams.make(150, 2000, 1900, 1900, 0)
    px = boundary_pixels(big, 4000, 4000)
    px = px[(px[:, 1] < 110) & (px[:, 0] > 100) & (px[:, 0] < 200)]
    px = px[np.argsort(px[:, 0])]
    reg = search_region(EdgeContour(px))
    assert all(v != 0 for v in reg._refs())


def test_region_requires_distinct_endpoints():
    with pytest.raises(NoRegionError):
        search_region(EdgeContour(boundary_pixels(CIRCLE), closed=True))


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0.6, 2.5), st.floats(0, 2 * math.pi), st.floats(0.4, 2.5))
def test_region_symmetric_in_endpoint_order(t0, span, u0, uspan):
    e = EllipseParams.make(150, 150, 70, 40, 0.3)
    a = ellipse_arc(e, t0, t0 + span)
    b = ellipse_arc(e, u0, u0 + uspan, cid=1)
    if len(a) < 9 or len(b) < 2:
        return
    rev = EdgeContour(a.pixels[::-1], id=a.id)
    r1, r2 = search_region(a), search_region(rev)
    assert np.array_equal(r1.pixel_mask(b.pixels), r2.pixel_mask(b.pixels))


def test_convexity_facing_quarters():
    e1 = ellipse_arc(CIRCLE, 0.1, math.pi / 2 - 0.1)
    e2 = ellipse_arc(CIRCLE, math.pi + 0.1, 3 * math.pi / 2 - 0.1, cid=1)
    assert associated_convexity(e1, e2)
    assert associated_convexity(e2, e1)


def test_convexity_arcs_curving_away():
    left = EllipseParams.make(100, 150, 40, 40, 0)
    right = EllipseParams.make(200, 150, 40, 40, 0)
    # ") (": each arc bulges toward the other
    e1 = ellipse_arc(left, -math.pi / 2 + 0.3, math.pi / 2 - 0.3)
    e2 = ellipse_arc(right, math.pi / 2 + 0.3, 3 * math.pi / 2 - 0.3, cid=1)
    assert not associated_convexity(e1, e2)
    assert not associated_convexity(e2, e1)
    # "( )": the outer sides, as on the two ends of one wide ellipse
    o1 = ellipse_arc(left, math.pi / 2 + 0.3, 3 * math.pi / 2 - 0.3)
    o2 = ellipse_arc(right, -math.pi / 2 + 0.3, math.pi / 2 - 0.3, cid=1)
    assert associated_convexity(o1, o2)


def test_convexity_translated_copy():
    e1 = ellipse_arc(CIRCLE, math.pi / 2 + 0.3, 3 * math.pi / 2 - 0.3)
    e2 = EdgeContour(e1.pixels + np.array([-90, 0]), id=1)
    assert not associated_convexity(e1, e2)
    assert not associated_convexity(e2, e1)


def test_convexity_vectorised_matches_scalar(rng):
    e = EllipseParams.make(150, 150, 90, 50, 0.7)
    arcs = [ellipse_arc(e, t, t + rng.uniform(0.3, 1.5), cid=k)
            for k, t in enumerate(rng.uniform(0, 2 * math.pi, 12))]
    for a in arcs:
        many = associated_convexity_many(a, arcs)
        assert list(many) == [associated_convexity(a, b) for b in arcs]
