"""Piecewise-linear approximation of contours, linear cues, and splitting into
pieces of smooth curvature (no sharp turns, no inflexions)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contours import EdgeContour


@dataclass
class PolylineApprox:
    """RDP vertices of one contour.

    For a closed contour the vertex list runs over the pixel chain with the
    first pixel appended, so the last vertex index equals ``len(contour)`` and
    denotes the first pixel again; ``wrap_angle`` is then the turn at that
    pixel (last segment into first).
    """

    contour_id: int
    vertex_indices: np.ndarray
    angles: np.ndarray
    closed: bool = False
    wrap_angle: float | None = None

    @property
    def n_segments(self) -> int:
        return len(self.vertex_indices) - 1

    def all_angles(self) -> np.ndarray:
        if self.wrap_angle is None:
            return self.angles
        return np.append(self.angles, self.wrap_angle)


@dataclass
class LinearCue:
    p1: tuple[int, int]
    p2: tuple[int, int]
    contour_id: int


def point_line_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Perpendicular distance of points to the line through a and b."""
    d = b - a
    norm = math.hypot(d[0], d[1])
    rel = points - a
    if norm == 0.0:
        return np.hypot(rel[:, 0], rel[:, 1])
    return np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / norm


def _rdp_indices(pts: np.ndarray, lo: int, hi: int, tol: float) -> list[int]:
    keep = [lo, hi]
    stack = [(lo, hi)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        dev = point_line_distance(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(dev))
        if dev[k] >= tol:
            m = i + 1 + k
            keep.append(m)
            stack.append((i, m))
            stack.append((m, j))
    return sorted(set(keep))


def turn_angles(vertices: np.ndarray) -> np.ndarray:
    """Signed angle in [-pi, pi] from each segment to the next."""
    d = np.diff(vertices.astype(np.float64), axis=0)
    if len(d) < 2:
        return np.zeros(0)
    a, b = d[:-1], d[1:]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = (a * b).sum(axis=1)
    return np.arctan2(cross, dot)


def _chain(e: EdgeContour) -> np.ndarray:
    """Pixel chain the vertex indices refer to (closed chains repeat pixel 0)."""
    if e.closed:
        return np.vstack([e.pixels, e.pixels[:1]])
    return e.pixels


def rdp_fit(e: EdgeContour, tol: float = 2.0) -> PolylineApprox:
    """Recursive split at the max-deviation pixel until every deviation < tol."""
    pts = e.pixels.astype(np.float64)
    n = len(pts)
    if n < 2:
        raise ValueError("contour needs at least two pixels")
    if e.closed and n >= 3:
        ext = np.vstack([pts, pts[:1]])
        far = int(np.argmax(np.hypot(*(pts - pts[0]).T)))
        idx = sorted(set(_rdp_indices(ext, 0, far, tol)) | set(_rdp_indices(ext, far, n, tol)))
        verts = ext[idx]
        angles = turn_angles(verts)
        d_last = verts[-1] - verts[-2]
        d_first = verts[1] - verts[0]
        wrap = math.atan2(d_last[0] * d_first[1] - d_last[1] * d_first[0], float(np.dot(d_last, d_first)))
        return PolylineApprox(e.id, np.array(idx), angles, closed=True, wrap_angle=wrap)
    idx = _rdp_indices(pts, 0, n - 1, tol)
    return PolylineApprox(e.id, np.array(idx), turn_angles(pts[idx]))


def max_deviation(e: EdgeContour, approx: PolylineApprox) -> float:
    chain = _chain(e).astype(np.float64)
    worst = 0.0
    vi = approx.vertex_indices
    for i, j in zip(vi[:-1], vi[1:]):
        if j - i >= 2:
            worst = max(worst, float(point_line_distance(chain[i + 1:j], chain[i], chain[j]).max()))
    return worst


def extract_linear_cues(contours, approxes) -> list[LinearCue]:
    cues = []
    for e, ap in zip(contours, approxes):
        if ap.n_segments == 1 and not ap.closed:
            p1, p2 = e.pixels[0], e.pixels[-1]
            cues.append(LinearCue((int(p1[0]), int(p1[1])), (int(p2[0]), int(p2[1])), e.id))
    return cues


def split_at(e: EdgeContour, cuts) -> list[EdgeContour]:
    """Split a contour at pixel indices; each cut pixel ends one piece and
    starts the next. A closed contour is first opened at its first cut."""
    n = len(e)
    cuts = sorted(set(int(c) % n if e.closed else int(c) for c in cuts))
    if e.closed:
        if not cuts:
            return [e]
        c0 = cuts[0]
        px = np.vstack([e.pixels[c0:], e.pixels[:c0], e.pixels[c0:c0 + 1]])
        inner = sorted((c - c0) % n for c in cuts[1:])
        return split_at(EdgeContour(px, closed=False, id=e.id), inner)
    cuts = [c for c in cuts if 0 < c < n - 1]
    if not cuts:
        return [e]
    bounds = [0] + cuts + [n - 1]
    return [EdgeContour(e.pixels[a:b + 1], closed=False, id=e.id) for a, b in zip(bounds[:-1], bounds[1:])]


def _vertex_angle_pairs(approx: PolylineApprox):
    # (angle, pixel index of the vertex where it occurs), in chain order
    pairs = [(float(a), int(v)) for a, v in zip(approx.angles, approx.vertex_indices[1:-1])]
    if approx.closed and approx.wrap_angle is not None:
        pairs.append((float(approx.wrap_angle), 0))
    return pairs


def sharp_turn_cuts(approx: PolylineApprox, theta0: float) -> list[int]:
    return [v for a, v in _vertex_angle_pairs(approx) if abs(a) > theta0]


def split_sharp_turns(e: EdgeContour, approx: PolylineApprox, theta0: float = math.pi / 2) -> list[EdgeContour]:
    return split_at(e, sharp_turn_cuts(approx, theta0))


def inflexion_cuts(approx: PolylineApprox) -> list[int]:
    """Vertices where the turn sign flips; zero turns take the previous sign."""
    pairs = _vertex_angle_pairs(approx)
    signs = [int(np.sign(a)) for a, _ in pairs]
    if approx.closed:
        nonzero = [s for s in signs if s != 0]
        prev = nonzero[-1] if nonzero else 0
    else:
        prev = 0
    cuts = []
    for s, (_, v) in zip(signs, pairs):
        if s == 0:
            continue
        if prev != 0 and s != prev:
            cuts.append(v)
        prev = s
    return cuts


def split_inflexions(e: EdgeContour, approx: PolylineApprox) -> list[EdgeContour]:
    return split_at(e, inflexion_cuts(approx))


def is_smooth(approx: PolylineApprox, theta0: float = math.pi / 2) -> bool:
    angles = approx.all_angles()
    if len(angles) == 0:
        return True
    if np.abs(angles).max() > theta0:
        return False
    return not (np.any(angles > 0) and np.any(angles < 0))


def smooth_segments(contours, tol: float = 2.0, theta0: float = math.pi / 2) -> list[EdgeContour]:
    """Split until every piece, re-fitted, has no sharp turn and no inflexion."""
    out = []
    work = list(reversed(list(contours)))
    while work:
        e = work.pop()
        if len(e) < 3:
            out.append(e)
            continue
        approx = rdp_fit(e, tol)
        pieces = split_sharp_turns(e, approx, theta0)
        if len(pieces) == 1 and pieces[0] is e:
            pieces = split_inflexions(e, approx)
        if len(pieces) == 1 and pieces[0] is e:
            out.append(e)
        else:
            work.extend(reversed(pieces))
    return out
