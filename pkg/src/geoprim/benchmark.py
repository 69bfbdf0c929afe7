"""Synthetic overlapping/occluded ellipse scenes and precision/recall scoring."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .ellipse import EllipseParams, distance_to_ellipse
from .pipeline import detect_ellipses
from .raster import edge_map_from_image, write_pbm

IMAGE_SIZE = 300
MIN_AXIS = 10.0
MAX_AXIS = IMAGE_SIZE / math.sqrt(2)
TP_THRESHOLD = 0.05
MODES = ("occluded", "overlapping")


class GenerationError(RuntimeError):
    pass


@dataclass
class SyntheticScene:
    image: np.ndarray  # bool edge map, row-major, 1 = boundary
    truth: list[EllipseParams]
    mode: str
    alpha: int
    seed: int
    gray: np.ndarray | None = None

    def truth_json(self) -> str:
        return json.dumps({"mode": self.mode, "alpha": self.alpha, "seed": self.seed,
                           "width": int(self.image.shape[1]), "height": int(self.image.shape[0]),
                           "truth": [dict(zip("x y a b theta".split(), e.astuple())) for e in self.truth]},
                          indent=1)

    def dump(self, stem) -> tuple[Path, Path]:
        stem = Path(stem)
        pbm, js = stem.with_suffix(".pbm"), stem.with_suffix(".json")
        write_pbm(pbm, self.image)
        js.write_text(self.truth_json() + "\n")
        return pbm, js


# ---------------------------------------------------------------------------
# Geometry of the constraints
# ---------------------------------------------------------------------------

def bounding_half_extents(e: EllipseParams) -> tuple[float, float]:
    c, s = math.cos(e.theta), math.sin(e.theta)
    return math.hypot(e.a * c, e.b * s), math.hypot(e.a * s, e.b * c)


def contained(e: EllipseParams, width: int = IMAGE_SIZE, height: int = IMAGE_SIZE) -> bool:
    """Whole ellipse inside the pixel frame [1, width] x [1, height]."""
    hx, hy = bounding_half_extents(e)
    return e.x - hx >= 1 and e.x + hx <= width and e.y - hy >= 1 and e.y + hy <= height


def inside_value(e: EllipseParams, pts) -> np.ndarray:
    """(u/a)^2 + (v/b)^2 in the ellipse frame: < 1 strictly inside."""
    loc = e.to_frame(pts)
    return (loc[..., 0] / e.a) ** 2 + (loc[..., 1] / e.b) ** 2


def boundaries_cross(e1: EllipseParams, e2: EllipseParams, n: int = 720) -> bool:
    v = inside_value(e2, e1.points(n))
    return bool(np.any(v < 1) and np.any(v > 1))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def boundary_pixels(e: EllipseParams, width: int = IMAGE_SIZE, height: int = IMAGE_SIZE) -> np.ndarray:
    """Ordered 1-px-thin 8-connected closed chain of (x, y) pixels on the boundary."""
    n = max(64, int(8 * math.pi * e.a))
    px = np.rint(e.points(n)).astype(np.int64)
    keep = np.any(px != np.roll(px, 1, axis=0), axis=1)
    px = px[keep]
    # drop corner pixels whose neighbours along the chain already touch
    changed = True
    while changed and len(px) > 4:
        prev, nxt = np.roll(px, 1, axis=0), np.roll(px, -1, axis=0)
        redundant = np.abs(prev - nxt).max(axis=1) <= 1
        # never remove two consecutive pixels in one pass
        idx = np.flatnonzero(redundant)
        take = []
        last = -2
        for i in idx:
            if i != last + 1:
                take.append(i)
                last = i
        if take and take[-1] == len(px) - 1 and take[0] == 0:
            take.pop()
        changed = bool(take)
        px = np.delete(px, take, axis=0)
    ok = (px[:, 0] >= 1) & (px[:, 0] <= width) & (px[:, 1] >= 1) & (px[:, 1] <= height)
    return px[ok]


def render(truth, mode: str, width: int = IMAGE_SIZE, height: int = IMAGE_SIZE) -> np.ndarray:
    """Boundary map; in occluded mode later ellipses sit on top and hide
    earlier boundary pixels strictly inside them."""
    img = np.zeros((height, width), dtype=bool)
    for k, e in enumerate(truth):
        px = boundary_pixels(e, width, height)
        if mode == "occluded":
            hidden = np.zeros(len(px), dtype=bool)
            for upper in truth[k + 1:]:
                hidden |= inside_value(upper, px) < 1
            px = px[~hidden]
        img[px[:, 1] - 1, px[:, 0] - 1] = True
    return img


def render_gray(truth, mode: str, rng: np.random.Generator,
                width: int = IMAGE_SIZE, height: int = IMAGE_SIZE) -> np.ndarray:
    """Grayscale rendering for the full pipeline.

    Occluded: opaque filled ellipses painted in z-order with random distinct
    intensities. Overlapping: dark 1-px boundaries on a white background.
    """
    if mode == "overlapping":
        return np.where(render(truth, mode, width, height), 0, 255).astype(np.uint8)
    ys, xs = np.mgrid[1:height + 1, 1:width + 1]
    pts = np.stack([xs, ys], axis=-1).astype(np.float64)
    img = np.full((height, width), 20, dtype=np.uint8)
    levels = rng.permutation(np.arange(60, 256, 8))
    for k, e in enumerate(truth):
        img[inside_value(e, pts) <= 1] = levels[k % len(levels)]
    return img


def generate_scene(alpha: int, mode: str, seed: int, gray: bool = False,
                   max_tries: int = 20000) -> SyntheticScene:
    """Random scene of ``alpha`` ellipses, each inside the frame and crossing
    the boundary of at least one other (every new ellipse must cross one of
    those already placed)."""
    if alpha < 2:
        raise ValueError("alpha must be at least 2")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, alpha, MODES.index(mode)]))
    truth: list[EllipseParams] = []
    tries = 0
    while len(truth) < alpha:
        tries += 1
        if tries > max_tries:
            raise GenerationError(f"could not place {alpha} ellipses after {max_tries} draws")
        b, a = np.sort(rng.uniform(MIN_AXIS, MAX_AXIS, size=2))
        x, y = rng.uniform(1, IMAGE_SIZE, size=2)
        e = EllipseParams.make(x, y, a, b, rng.uniform(0, math.pi))
        if not contained(e):
            continue
        if truth and not any(boundaries_cross(e, t) for t in truth):
            continue
        truth.append(e)
    img = render(truth, mode)
    g = render_gray(truth, mode, rng) if gray else None
    return SyntheticScene(img, truth, mode, alpha, seed, g)


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

def relative_rms(h: EllipseParams, t: EllipseParams, n: int = 360) -> float:
    """RMS distance from n points on the truth t to the boundary of h, over a_t."""
    d = distance_to_ellipse(t.points(n), h)
    return float(np.sqrt(np.mean(d ** 2)) / t.a)


def _rms_lower_bound(h: EllipseParams, t: EllipseParams, n: int = 360) -> float:
    # every boundary point of h lies in the annulus b_h <= r <= a_h about its center
    r = np.hypot(*(t.points(n) - (h.x, h.y)).T)
    gap = np.maximum(np.maximum(r - h.a, h.b - r), 0.0)
    return float(np.sqrt(np.mean(gap ** 2)) / t.a)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    matches: list[tuple[int, int, float]] = field(default_factory=list)  # (hyp, truth, error)

    @property
    def tp(self) -> int:
        return len(self.matches)


def f_measure(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def match_and_score(hyps, truth, threshold: float = TP_THRESHOLD) -> EvalReport:
    hyps = [getattr(h, "params", h) for h in hyps]
    truth = list(truth)
    if not hyps and not truth:
        return EvalReport(1.0, 1.0, 1.0)
    pairs = []
    for i, h in enumerate(hyps):
        for j, t in enumerate(truth):
            if _rms_lower_bound(h, t) >= threshold:
                continue
            err = relative_rms(h, t)
            if err < threshold:
                pairs.append((err, i, j))
    pairs.sort()
    used_h, used_t, matches = set(), set(), []
    for err, i, j in pairs:
        if i not in used_h and j not in used_t:
            used_h.add(i)
            used_t.add(j)
            matches.append((i, j, err))
    p = len(matches) / len(hyps) if hyps else 0.0
    r = len(matches) / len(truth) if truth else 0.0
    return EvalReport(p, r, f_measure(p, r), matches)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

CSV_HEADER = ("mode", "alpha", "scene", "precision", "recall", "f_measure")


def scene_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def evaluate_scene(job) -> tuple[float, float, float]:
    mode, alpha, seed, cfg, gray = job
    try:
        scene = generate_scene(alpha, mode, seed, gray=gray)
        edges = scene.image if not gray else edge_map_from_image(
            scene.gray, cfg.t_low, cfg.t_high, cfg.sigma, cfg.equalize)
        result = detect_ellipses(edges, cfg)
        rep = match_and_score(result.detections, scene.truth)
        return rep.precision, rep.recall, rep.f_measure
    except Exception:
        return 0.0, 0.0, 0.0


def sweep_rows(modes, alphas, images_per_alpha: int = 100, seed: int = 0,
               cfg: PipelineConfig | None = None, workers: int = 1, gray: bool = False):
    """Yield (mode, alpha, scene, P, R, F) rows; per-scene rows followed by a
    'mean' row for every (mode, alpha)."""
    cfg = cfg or PipelineConfig()
    jobs, keys = [], []
    for mode in modes:
        for alpha in alphas:
            for s in range(images_per_alpha):
                jobs.append((mode, alpha, scene_seed(seed, s), cfg, gray))
                keys.append((mode, alpha, s))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate_scene, jobs, chunksize=1))
    else:
        results = [evaluate_scene(j) for j in jobs]
    by_group: dict[tuple[str, int], list] = {}
    for (mode, alpha, s), res in zip(keys, results):
        by_group.setdefault((mode, alpha), []).append((s, res))
    rows = []
    for (mode, alpha), items in by_group.items():
        for s, (p, r, f) in items:
            rows.append((mode, alpha, s, p, r, f))
        arr = np.array([res for _, res in items], dtype=np.float64)
        mp, mr, mf = (math.fsum(arr[:, k]) / len(arr) for k in range(3))
        rows.append((mode, alpha, "mean", mp, mr, mf))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for mode, alpha, scene, p, r, f in rows:
        w.writerow([mode, alpha, scene, f"{p:.6f}", f"{r:.6f}", f"{f:.6f}"])
    return buf.getvalue()


def sweep(modes, alphas, images_per_alpha: int = 100, seed: int = 0,
          cfg: PipelineConfig | None = None, workers: int = 1, gray: bool = False) -> str:
    return rows_to_csv(sweep_rows(modes, alphas, images_per_alpha, seed, cfg, workers, gray))
