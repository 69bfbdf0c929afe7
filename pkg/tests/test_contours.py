import itertools
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geoprim.contours import (
    PixelClass,
    classify_map,
    classify_pixel,
    extract_contours,
    remove_isolated,
    trace_contours,
    transition_count,
    transition_map,
)

# Independent oracle: walk the ring counter-clockwise from the right neighbour
# and count 0 -> 1 transitions; any circular order gives the same count.
CCW = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))


def oracle_b(w):
    ring = [int(w[1 + dr][1 + dc]) for dr, dc in CCW]
    return 2 * sum(1 for i in range(8) if ring[i] == 0 and ring[(i + 1) % 8] == 1)


def window(bits):
    w = np.zeros((3, 3), dtype=bool)
    w[1, 1] = True
    cells = [(r, c) for r in range(3) for c in range(3) if (r, c) != (1, 1)]
    for bit, (r, c) in zip(bits, cells):
        w[r, c] = bool(bit)
    return w


ALL_WINDOWS = [window(bits) for bits in itertools.product((0, 1), repeat=8)]


def test_transition_count_matches_oracle_on_all_256_patterns():
    mismatches = [w for w in ALL_WINDOWS if transition_count(w) != oracle_b(w)]
    assert mismatches == []


def test_classes_on_all_patterns():
    for w in ALL_WINDOWS:
        b = oracle_b(w)
        nbrs = int(w.sum()) - 1
        cls = classify_pixel(w)
        if b == 2:
            assert cls is PixelClass.END
        elif b >= 6:
            assert cls is PixelClass.JUNCTION
        elif b == 0 and nbrs == 0:
            assert cls is PixelClass.ISOLATED
        else:
            assert cls is PixelClass.INTERIOR


def test_transition_map_agrees_with_windows(rng):
    m = rng.random((25, 25)) < 0.4
    bmap = transition_map(m)
    padded = np.pad(m, 1)
    for r, c in zip(*np.nonzero(m)):
        assert bmap[r, c] == transition_count(padded[r:r + 3, c:c + 3])


def test_named_classes():
    assert classify_pixel(window([0] * 8)) is PixelClass.ISOLATED
    assert classify_pixel(window([0, 1, 0, 0, 0, 0, 0, 0])) is PixelClass.END
    t = np.array([[1, 0, 1], [0, 1, 0], [0, 1, 0]], dtype=bool)
    assert classify_pixel(t) is PixelClass.JUNCTION


def test_remove_isolated():
    m = np.zeros((5, 5), dtype=bool)
    m[2, 2] = True
    assert not remove_isolated(m).any()
    m[2, 3] = True
    assert np.array_equal(remove_isolated(m), m)
    empty = np.zeros((4, 4), dtype=bool)
    assert np.array_equal(remove_isolated(empty), empty)


def test_straight_line():
    m = np.zeros((5, 14), dtype=bool)
    m[2, 2:12] = True
    cs = trace_contours(m)
    assert len(cs) == 1
    px = cs[0].pixels
    assert len(px) == 10
    assert {tuple(px[0]), tuple(px[-1])} == {(3, 3), (12, 3)}


def test_t_shape_breaks_at_junction():
    m = np.zeros((15, 15), dtype=bool)
    m[3, 2:13] = True
    m[3:13, 7] = True
    cs = trace_contours(m)
    assert len(cs) == 3
    junction = (8, 4)
    for c in cs:
        ends = {tuple(c.pixels[0]), tuple(c.pixels[-1])}
        assert junction in ends


def midpoint_circle(r, cx, cy):
    pts = set()
    x, y, err = r, 0, 1 - r
    while x >= y:
        for a, b in ((x, y), (y, x)):
            for sx in (-1, 1):
                for sy in (-1, 1):
                    pts.add((cx + sx * a, cy + sy * b))
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1
    return pts


def thin(pts):
    # drop pixels whose removal keeps the ring 8-connected (midpoint circles
    # can have 4-connected corner doubles)
    m = np.zeros((80, 80), dtype=bool)
    for x, y in pts:
        m[y - 1, x - 1] = True
    changed = True
    while changed:
        changed = False
        for r, c in zip(*np.nonzero(m)):
            n = m[r - 1:r + 2, c - 1:c + 2].sum() - 1
            w = m[r - 1:r + 2, c - 1:c + 2]
            if n == 2 and ((w[0, 1] and (w[1, 0] or w[1, 2])) or (w[2, 1] and (w[1, 0] or w[1, 2]))):
                m[r, c] = False
                changed = True
    return m


def test_closed_circle_covers_every_pixel_once():
    m = thin(midpoint_circle(20, 40, 40))
    cs = trace_contours(m)
    assert len(cs) == 1
    c = cs[0]
    assert c.closed
    got = [tuple(p) for p in c.pixels]
    assert len(got) == len(set(got))
    truth = {(c_ + 1, r + 1) for r, c_ in zip(*np.nonzero(m))}
    assert set(got) == truth


def check_contour_invariants(m, contours):
    b = transition_map(m)
    junction = m & (b >= 6)
    seen = {}
    for c in contours:
        px = c.pixels
        steps = np.abs(np.diff(px, axis=0)).max(axis=1)
        assert (steps == 1).all(), "consecutive pixels must be 8-neighbours"
        for x, y in px[1:-1]:
            assert not junction[y - 1, x - 1], "junction inside a contour"
        for x, y in px:
            if not junction[y - 1, x - 1]:
                seen[(x, y)] = seen.get((x, y), 0) + 1
    assert all(v == 1 for v in seen.values()), "non-junction pixel in two contours"
    return seen


def check_coverage(m, contours):
    """Every non-junction pixel is in exactly one chain, except one-pixel
    remnants whose neighbours were all claimed by other chains (a chain
    needs at least two pixels)."""
    seen = check_contour_invariants(m, contours)
    b = transition_map(m)
    h, w = m.shape
    non_junction = {(c + 1, r + 1) for r, c in zip(*np.nonzero(m & (b < 6)))}
    assert set(seen) <= non_junction
    remnants = non_junction - set(seen)
    for x, y in remnants:
        r, c = y - 1, x - 1
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                rr, cc = r + dr, c + dc
                if (dr or dc) and 0 <= rr < h and 0 <= cc < w and m[rr, cc]:
                    assert b[rr, cc] < 6 and (cc + 1, rr + 1) in seen
    return remnants


@settings(max_examples=60, deadline=None)
@given(arrays(bool, (16, 16), elements=st.booleans()))
def test_tracing_invariants_random_maps(m):
    m = remove_isolated(m)
    check_coverage(m, trace_contours(m))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["occluded", "overlapping"]))
def test_rendered_scenes_are_covered(seed, mode):
    from geoprim.benchmark import generate_scene

    m = remove_isolated(generate_scene(4, mode, seed).image)
    check_coverage(m, trace_contours(m))


@settings(max_examples=40, deadline=None)
@given(st.floats(60, 240), st.floats(60, 240), st.floats(10, 50), st.floats(0.3, 1.0), st.floats(0, 3.14))
def test_single_ellipse_fully_covered(x, y, a, ratio, theta):
    from conftest import ellipse_edge_map
    from geoprim.ellipse import EllipseParams

    m = ellipse_edge_map(EllipseParams.make(x, y, a, max(a * ratio, 3.0), theta))
    assert check_coverage(m, trace_contours(m)) == set()


def test_tracing_is_deterministic(rng):
    m = remove_isolated(rng.random((40, 40)) < 0.25)
    a = [c.pixels.tolist() for c in trace_contours(m)]
    b = [c.pixels.tolist() for c in trace_contours(m.copy())]
    assert a == b


def test_extract_contours_min_length_and_ids():
    m = np.zeros((10, 30), dtype=bool)
    m[2, 2:5] = True
    m[6, 2:25] = True
    cs = extract_contours(m, min_length=5)
    assert len(cs) == 1
    assert cs[0].id == 0
    assert len(cs[0]) == 23


def test_classify_map_marks_only_edges():
    m = np.zeros((6, 6), dtype=bool)
    m[2, 1:5] = True
    cm = classify_map(m)
    assert cm[0, 0] is None
    assert cm[2, 1] is PixelClass.END and cm[2, 2] is PixelClass.INTERIOR
    assert math.isclose(sum(v is not None for v in cm.ravel()), 4)
