"""Stage 2: cluster near-duplicate hypotheses and keep the salient ones."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ellipse import distance_to_ellipse
from .hypotheses import EllipseHypothesis

CIRCLE_RATIO = 0.9
TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class SimilarityTolerances:
    x: float = 0.1
    y: float = 0.1
    a: float = 0.1
    b: float = 0.1
    theta: float = 0.1

    @classmethod
    def uniform(cls, tol: float) -> "SimilarityTolerances":
        return cls(tol, tol, tol, tol, tol)


@dataclass(frozen=True)
class SimilarityDiff:
    D_x: float
    D_y: float
    D_a: float
    D_b: float
    D_theta: float
    verdict: bool


@dataclass
class SaliencyRecord:
    c: float
    a: float
    phi: float
    sigma_add: float
    selected: bool = False


def orientation_gap(t1: float, t2: float) -> float:
    """Smallest difference between two axis orientations, in [0, pi/2]."""
    d = abs(t1 - t2) % math.pi
    return min(d, math.pi - d)


def similarity(h1, h2, X: float, Y: float, tols: SimilarityTolerances = SimilarityTolerances()) -> SimilarityDiff:
    p1 = getattr(h1, "params", h1)
    p2 = getattr(h2, "params", h2)
    D_x = abs(p1.x - p2.x) / X
    D_y = abs(p1.y - p2.y) / Y
    D_a = abs(p1.a - p2.a) / max(p1.a, p2.a)
    D_b = abs(p1.b - p2.b) / min(p1.b, p2.b)
    round1 = p1.b / p1.a >= CIRCLE_RATIO
    round2 = p2.b / p2.a >= CIRCLE_RATIO
    if round1 and round2:
        D_t = 0.0
    elif round1 != round2:
        D_t = 1.0
    else:
        D_t = orientation_gap(p1.theta, p2.theta) / math.pi
    verdict = (D_x < tols.x and D_y < tols.y and D_a < tols.a and D_b < tols.b and D_t < tols.theta)
    return SimilarityDiff(D_x, D_y, D_a, D_b, D_t, verdict)


def eccentricity_sq(a: float, b: float) -> float:
    return 1.0 - (b / a) ** 2


def minor_axis_sensitivity(rel: float) -> float:
    """(a/b)^2 (e1^2 - e2^2) for b2 = b (1 + rel) at fixed a: grows like 2 rel,
    which is why D_b divides by the smaller semi-minor axis."""
    return rel * (2.0 + rel)


def major_axis_sensitivity(rel: float) -> float:
    """(a/b)^2 (e1^2 - e2^2) for a2 = a (1 - rel) at fixed b."""
    return rel * (2.0 - rel) / (1.0 - rel) ** 2


# ---------------------------------------------------------------------------
# Saliency criteria
# ---------------------------------------------------------------------------

def angular_span(h: EllipseHypothesis, edge) -> tuple[float, float]:
    """(start, span) of the shortest circular arc holding every pixel's polar
    angle about the fitted center, measured in the ellipse axis frame."""
    loc = h.params.to_frame(edge.pixels)
    ang = np.sort(np.mod(np.arctan2(loc[:, 1], loc[:, 0]), TWO_PI))
    if len(ang) == 1:
        return float(ang[0]), 0.0
    gaps = np.diff(np.append(ang, ang[0] + TWO_PI))
    k = int(np.argmax(gaps))
    start = float(ang[(k + 1) % len(ang)])
    return start, float(TWO_PI - gaps[k])


def circumference_ratio(h: EllipseHypothesis) -> float:
    return sum(angular_span(h, e)[1] for e in h.edges) / TWO_PI


def alignment_ratio(h: EllipseHypothesis, d0: float = 2.0) -> float:
    pixels = h.pixels
    if len(pixels) == 0:
        return 0.0
    d = distance_to_ellipse(pixels, h.params)
    return float(np.count_nonzero(d < d0)) / len(pixels)


def _outward_tangent(edge, at_start: bool, p: int = 3) -> np.ndarray:
    px = edge.pixels.astype(np.float64)
    k = min(2 * p, len(px) - 1)
    d = px[0] - px[k] if at_start else px[-1] - px[-1 - k]
    n = math.hypot(d[0], d[1])
    return d / n if n > 0 else d


def continuity_angle(e1, e2, p: int = 3) -> float:
    """Angle in [0, pi] between the outward tangent rays at the nearest pair
    of endpoints; pi means one edge continues the other smoothly."""
    ends1 = (e1.pixels[0], e1.pixels[-1])
    ends2 = (e2.pixels[0], e2.pixels[-1])
    best = None
    for i, q1 in enumerate(ends1):
        for j, q2 in enumerate(ends2):
            dist = math.dist(q1, q2)
            if best is None or dist < best[0]:
                best = (dist, i, j)
    _, i, j = best
    t1 = _outward_tangent(e1, i == 0, p)
    t2 = _outward_tangent(e2, j == 0, p)
    cos = float(np.clip(np.dot(t1, t2), -1.0, 1.0))
    return math.acos(cos)


def angular_continuity(h: EllipseHypothesis, p: int = 3) -> float:
    if len(h.edges) <= 1:
        return 1.0
    ordered = sorted(h.edges, key=lambda e: angular_span(h, e)[0])
    total = sum(continuity_angle(a, b, p) for a, b in zip(ordered[:-1], ordered[1:]))
    return total / (len(ordered) - 1) / math.pi


# ---------------------------------------------------------------------------
# Clustering and selection
# ---------------------------------------------------------------------------

def cluster_similar(hyps, X: float, Y: float, tols: SimilarityTolerances = SimilarityTolerances()):
    """Connected components of the similarity graph; one representative per
    component (largest circumference ratio, then lower fit error, then
    earlier position)."""
    hyps = list(hyps)
    n = len(hyps)
    parent = list(range(n))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for i in range(n):
        for j in range(i + 1, n):
            if similarity(hyps[i], hyps[j], X, Y, tols).verdict:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    circ = [circumference_ratio(h) for h in hyps]
    best: dict[int, int] = {}
    for k in range(n):
        root = find(k)
        cur = best.get(root)
        if cur is None or (-circ[k], hyps[k].fit_error, k) < (-circ[cur], hyps[cur].fit_error, cur):
            best[root] = k
    return [hyps[k] for k in sorted(best.values())]


def saliency_record(h: EllipseHypothesis, d0: float = 2.0, p: int = 3) -> SaliencyRecord:
    c = circumference_ratio(h)
    a = alignment_ratio(h, d0)
    phi = angular_continuity(h, p)
    return SaliencyRecord(c, a, phi, (a + c + phi) / 3.0)


def select_from_records(records: list[SaliencyRecord]) -> list[SaliencyRecord]:
    if not records:
        return records
    n = len(records)
    # tiny slack so a value equal to the set average is not lost to rounding
    slack = 1e-12
    avg_a = math.fsum(r.a for r in records) / n
    avg_c = math.fsum(r.c for r in records) / n
    avg_p = math.fsum(r.phi for r in records) / n
    avg_s = math.fsum(r.sigma_add for r in records) / n
    for r in records:
        r.selected = (r.a >= avg_a - slack and r.c >= avg_c - slack
                      and r.phi >= avg_p - slack and r.sigma_add >= avg_s - slack)
    return records


def select_salient(hyps, d0: float = 2.0, p: int = 3):
    """Returns (selected hypotheses, records for every input hypothesis)."""
    hyps = list(hyps)
    records = select_from_records([saliency_record(h, d0, p) for h in hyps])
    return [h for h, r in zip(hyps, records) if r.selected], records
