"""Geometric primitives used by the ellipse detector: lines, tangent
estimation, three-point center construction, center binning, search regions
and the associated-convexity test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contours import EdgeContour

PARALLEL_EPS = 1e-9
ON_LINE_TOL = 0.5
OUT_OF_REGION = 0


class DegenerateTangentError(ValueError):
    pass


class InvalidCenterError(ValueError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NoRegionError(ValueError):
    pass


@dataclass(frozen=True)
class Line:
    """A x + B y + C = 0 with A^2 + B^2 = 1."""

    A: float
    B: float
    C: float

    @classmethod
    def from_point_direction(cls, p, d) -> "Line":
        dx, dy = float(d[0]), float(d[1])
        norm = math.hypot(dx, dy)
        if norm == 0.0:
            raise ValueError("zero direction")
        A, B = -dy / norm, dx / norm
        return cls(A, B, -(A * float(p[0]) + B * float(p[1])))

    @classmethod
    def through(cls, p, q) -> "Line":
        return cls.from_point_direction(p, (q[0] - p[0], q[1] - p[1]))

    @property
    def direction(self) -> tuple[float, float]:
        return (self.B, -self.A)

    def signed_distance(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return self.A * pts[..., 0] + self.B * pts[..., 1] + self.C

    def is_parallel(self, other: "Line") -> bool:
        return abs(self.A * other.B - self.B * other.A) < PARALLEL_EPS

    def intersect(self, other: "Line") -> np.ndarray:
        det = self.A * other.B - self.B * other.A
        if abs(det) < PARALLEL_EPS:
            raise InvalidCenterError("parallel lines")
        x = (self.B * other.C - other.B * self.C) / det
        y = (other.A * self.C - self.A * other.C) / det
        return np.array([x, y])


# ---------------------------------------------------------------------------
# Tangents
# ---------------------------------------------------------------------------

def _tangent_window(n: int, i: int, p: int, closed: bool):
    if closed:
        return (i - p) % n, (i + p) % n
    lo, hi = i - p, i + p
    if lo < 0:
        lo, hi = 0, hi - lo
    if hi > n - 1:
        lo, hi = lo - (hi - (n - 1)), n - 1
    return max(lo, 0), hi


def estimate_tangent(e: EdgeContour, i: int, p: int = 3) -> Line:
    """Line through pixel i parallel to the secant P[i-p] -> P[i+p].

    Near the ends of an open contour the window is shifted to stay inside
    the chain (one-sided), and clamped to the whole chain if it is short.
    """
    n = len(e)
    lo, hi = _tangent_window(n, i, p, e.closed)
    d = e.pixels[hi] - e.pixels[lo]
    if d[0] == 0 and d[1] == 0:
        raise DegenerateTangentError(f"secant endpoints coincide at index {i}")
    return Line.from_point_direction(e.pixels[i], d)


def tangent_directions(e: EdgeContour, p: int = 3):
    """Unit secant directions for every pixel; returns (dirs, valid)."""
    n = len(e)
    idx = np.arange(n)
    if e.closed:
        lo, hi = (idx - p) % n, (idx + p) % n
    else:
        lo, hi = idx - p, idx + p
        shift = np.where(lo < 0, -lo, 0)
        lo, hi = lo + shift, hi + shift
        over = np.where(hi > n - 1, hi - (n - 1), 0)
        lo, hi = np.maximum(lo - over, 0), hi - over
    d = (e.pixels[hi] - e.pixels[lo]).astype(np.float64)
    norm = np.hypot(d[:, 0], d[:, 1])
    valid = norm > 0
    d[valid] /= norm[valid, None]
    return d, valid


# ---------------------------------------------------------------------------
# Three-point center
# ---------------------------------------------------------------------------

def center_from_triplet(P1, P2, P3, t1: Line, t2: Line, t3: Line) -> np.ndarray:
    """Ellipse center from three boundary points and their tangents.

    Raises InvalidCenterError when consecutive tangents are parallel or the
    two constructed lines are parallel (collinear triplet).
    """
    P1, P2, P3 = (np.asarray(p, dtype=np.float64) for p in (P1, P2, P3))
    if np.array_equal(P1, P2) or np.array_equal(P2, P3) or np.array_equal(P1, P3):
        raise InvalidCenterError("points not distinct")
    if t1.is_parallel(t2) or t2.is_parallel(t3):
        raise InvalidCenterError("parallel tangents")
    T12 = t1.intersect(t2)
    T23 = t2.intersect(t3)
    M12 = (P1 + P2) / 2
    M23 = (P2 + P3) / 2
    if np.allclose(T12, M12, rtol=0, atol=1e-12) or np.allclose(T23, M23, rtol=0, atol=1e-12):
        raise InvalidCenterError("degenerate construction line")
    l12 = Line.through(M12, T12)
    l23 = Line.through(M23, T23)
    if l12.is_parallel(l23):
        raise InvalidCenterError("collinear triplet")
    return l12.intersect(l23)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def centers_from_triplets(P: np.ndarray, D: np.ndarray):
    """Vectorised center construction.

    P, D: (S, 3, 2) points and unit tangent directions. Returns (centers, valid).
    """
    P = np.asarray(P, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    p1, p2, p3 = P[:, 0], P[:, 1], P[:, 2]
    d1, d2, d3 = D[:, 0], D[:, 1], D[:, 2]
    c12 = _cross(d1, d2)
    c23 = _cross(d2, d3)
    valid = (np.abs(c12) >= PARALLEL_EPS) & (np.abs(c23) >= PARALLEL_EPS)
    with np.errstate(divide="ignore", invalid="ignore"):
        T12 = p1 + d1 * (_cross(p2 - p1, d2) / c12)[:, None]
        T23 = p2 + d2 * (_cross(p3 - p2, d3) / c23)[:, None]
        m12 = (p1 + p2) / 2
        m23 = (p2 + p3) / 2
        u = T12 - m12
        v = T23 - m23
        nu = np.hypot(u[:, 0], u[:, 1])
        nv = np.hypot(v[:, 0], v[:, 1])
        valid &= (nu > 1e-12) & (nv > 1e-12)
        u = u / nu[:, None]
        v = v / nv[:, None]
        cuv = _cross(u, v)
        valid &= np.abs(cuv) >= PARALLEL_EPS
        s = _cross(m23 - m12, v) / cuv
        centers = m12 + u * s[:, None]
    valid &= np.isfinite(centers).all(axis=1)
    return centers, valid


# ---------------------------------------------------------------------------
# Bins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinGrid:
    """Center-space quantisation over the image (plus an optional margin).

    ``M`` x ``N`` is the region size in pixels (x extent, y extent), ``m`` x
    ``n`` the bin size. Bins are numbered from 1 in raster order.
    """

    M: int
    N: int
    m: int = 10
    n: int = 10
    margin: int = 0

    @classmethod
    def for_image(cls, width: int, height: int, bin_size: int = 10, margin: int = 0) -> "BinGrid":
        return cls(width + 2 * margin, height + 2 * margin, bin_size, bin_size, margin)

    @property
    def B_m(self) -> int:
        return -(-self.M // self.m)

    @property
    def B_n(self) -> int:
        return -(-self.N // self.n)

    @property
    def n_bins(self) -> int:
        return self.B_m * self.B_n

    def bins_of(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        x = pts[:, 0] + self.margin
        y = pts[:, 1] + self.margin
        inside = (x > 0) & (x <= self.M) & (y > 0) & (y <= self.N)
        col = np.ceil(np.where(inside, x, 1) / self.m).astype(np.int64)
        row = np.ceil(np.where(inside, y, 1) / self.n).astype(np.int64)
        return np.where(inside, (row - 1) * self.B_m + col, OUT_OF_REGION)

    def rowcol(self, b: int) -> tuple[int, int]:
        """0-based (row, col) of bin b."""
        return (b - 1) // self.B_m, (b - 1) % self.B_m

    def in_window(self, ref: int, b: int, d: int) -> bool:
        if ref == OUT_OF_REGION or b == OUT_OF_REGION:
            return False
        r0, c0 = self.rowcol(ref)
        r1, c1 = self.rowcol(b)
        half = d // 2
        return abs(r0 - r1) <= half and abs(c0 - c1) <= half


def bin_of_point(p, grid: BinGrid) -> int:
    return int(grid.bins_of(p)[0])


# ---------------------------------------------------------------------------
# Search region and associated convexity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchRegion:
    l1: Line
    l2: Line
    l3: Line
    p_mid: tuple[float, float]

    def _refs(self):
        return tuple(float(np.sign(l.signed_distance(self.p_mid))) for l in (self.l1, self.l2, self.l3))

    def pixel_mask(self, pts) -> np.ndarray:
        """Per-pixel pass mask for the three side tests."""
        pts = np.asarray(pts, dtype=np.float64)
        r1, r2, r3 = self._refs()
        if r1 == 0 or r2 == 0 or r3 == 0:
            return np.zeros(len(pts), dtype=bool)
        s1 = self.l1.signed_distance(pts)
        s2 = self.l2.signed_distance(pts)
        s3 = self.l3.signed_distance(pts)
        ok1 = (s1 * r1 > 0) | (np.abs(s1) < ON_LINE_TOL)
        ok2 = (s2 * r2 > 0) | (np.abs(s2) < ON_LINE_TOL)
        ok3 = (s3 * r3 < 0) | (np.abs(s3) < ON_LINE_TOL)
        return ok1 & ok2 & ok3

    def contains(self, e: EdgeContour) -> bool:
        return bool(self.pixel_mask(e.pixels).all())


def search_region(e: EdgeContour, p: int = 3) -> SearchRegion:
    n = len(e)
    if e.closed or n < 3:
        raise NoRegionError("closed or too short contour")
    first, last = e.pixels[0], e.pixels[-1]
    if np.array_equal(first, last):
        raise NoRegionError("contour endpoints coincide")
    try:
        l1 = estimate_tangent(e, 0, p)
        l2 = estimate_tangent(e, n - 1, p)
    except DegenerateTangentError as exc:
        raise NoRegionError(str(exc)) from exc
    l3 = Line.through(first, last)
    mid = e.pixels[n // 2]
    return SearchRegion(l1, l2, l3, (float(mid[0]), float(mid[1])))


def edges_in_search_region(region: SearchRegion, candidates) -> list[EdgeContour]:
    return [c for c in candidates if region.contains(c)]


def associated_convexity(e1: EdgeContour, e2: EdgeContour, tol: float = 2.0) -> bool:
    """True iff the two arcs bulge away from each other along the line joining
    their chord midpoints P1, P2 (the only pairing that can close an ellipse).

    With P1', P2' the pixels of each arc nearest that line, the path
    P1' -> P1 -> P2 -> P2' must be straight to within ``tol``; an arc that
    never comes within ``tol`` of the line fails.
    """
    return bool(associated_convexity_many(e1, [e2], tol)[0])


def associated_convexity_many(e1: EdgeContour, others, tol: float = 2.0) -> np.ndarray:
    """``associated_convexity(e1, e)`` for every e in ``others`` at once."""
    others = list(others)
    out = np.zeros(len(others), dtype=bool)
    if e1.closed or not others:
        return out
    px1 = e1.pixels.astype(np.float64)
    P1 = (px1[0] + px1[-1]) / 2.0
    open_ = np.array([not e.closed for e in others])
    P2 = np.array([(e.pixels[0] + e.pixels[-1]) / 2.0 for e in others], dtype=np.float64)
    span = P2 - P1
    length = np.hypot(span[:, 0], span[:, 1])
    chord = px1[-1] - px1[0]
    chord_len = math.hypot(chord[0], chord[1])
    # Arcs sharing (almost) the same chord, e.g. two halves of one ellipse,
    # leave the joining line undefined; use the normal of e1's chord instead.
    shared = length < tol
    ok = open_ & (~shared | (chord_len > 0))
    if not ok.any():
        return out
    idx = np.flatnonzero(ok)
    normal = np.empty((len(idx), 2))
    far = ~shared[idx]
    normal[far] = np.stack([-span[idx[far], 1], span[idx[far], 0]], axis=1) / length[idx[far], None]
    if not far.all():
        normal[~far] = chord / chord_len
    # nearest pixel of e1 to each joining line
    d1 = np.abs((px1 - P1) @ normal.T)  # (n1, J)
    k1 = d1.argmin(axis=0)
    near1 = d1[k1, np.arange(len(idx))] <= tol
    Q1 = px1[k1]
    # nearest pixel of each candidate to its own joining line
    lens = np.array([len(others[j]) for j in idx])
    starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
    px2 = np.vstack([others[j].pixels for j in idx]).astype(np.float64)
    owner = np.repeat(np.arange(len(idx)), lens)
    d2 = np.abs(((px2 - P1) * normal[owner]).sum(axis=1))
    mins = np.minimum.reduceat(d2, starts)
    hit = np.flatnonzero(d2 == mins[owner])
    _, first = np.unique(owner[hit], return_index=True)
    Q2 = px2[hit[first]]
    near2 = mins <= tol
    lhs = np.hypot(*(Q2 - Q1).T)
    rhs = np.hypot(*(Q1 - P1).T) + length[idx] + np.hypot(*(Q2 - P2[idx]).T)
    out[idx] = near1 & near2 & (np.abs(lhs - rhs) <= tol)
    return out
