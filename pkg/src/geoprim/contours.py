"""Edge-contour extraction: isolated-pixel removal, end/junction labelling and
linking of edge pixels into branchless ordered chains.

Pixel coordinates on contours are 1-based ``(x, y)``: ``x = col + 1`` and
``y = row + 1``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class PixelClass(enum.Enum):
    ISOLATED = "isolated"
    END = "end"
    JUNCTION = "junction"
    INTERIOR = "interior"


# Circular neighbour order, clockwise from the top-left, as (drow, dcol).
RING = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
# Walk preference: 4-neighbours before diagonals, so staircase corners are
# not skipped.
_STEP_ORDER = ((-1, 0), (0, 1), (1, 0), (0, -1), (-1, 1), (1, 1), (1, -1), (-1, -1))


@dataclass
class EdgeContour:
    pixels: np.ndarray  # (N, 2) int, 1-based (x, y)
    closed: bool = False
    id: int = -1

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)

    def __len__(self):
        return len(self.pixels)

    @property
    def endpoints(self):
        return self.pixels[0], self.pixels[-1]

    def to_json(self) -> str:
        return json.dumps({"id": self.id, "pixels": self.pixels.tolist()})


def neighbour_count(edges: np.ndarray) -> np.ndarray:
    kernel = np.ones((3, 3), dtype=np.int32)
    kernel[1, 1] = 0
    return ndimage.convolve(edges.astype(np.int32), kernel, mode="constant", cval=0)


def remove_isolated(edges: np.ndarray) -> np.ndarray:
    edges = np.asarray(edges, dtype=bool)
    return edges & (neighbour_count(edges) > 0)


def transition_count(window) -> int:
    """b from the ring comparison: sum of |u_i - v_i| with u the ring shifted by one."""
    w = np.asarray(window, dtype=np.int8).reshape(3, 3)
    v = np.array([w[1 + dr, 1 + dc] for dr, dc in RING])
    u = np.roll(v, -1)
    return int(np.abs(u - v).sum())


def _class_from_b(b: int, nbrs: int) -> PixelClass:
    if b == 0:
        # b is also 0 when all eight neighbours are set; that pixel is not isolated
        return PixelClass.ISOLATED if nbrs == 0 else PixelClass.INTERIOR
    if b == 2:
        return PixelClass.END
    if b >= 6:
        return PixelClass.JUNCTION
    return PixelClass.INTERIOR


def classify_pixel(window) -> PixelClass:
    w = np.asarray(window, dtype=bool).reshape(3, 3)
    nbrs = int(w.sum()) - int(w[1, 1])
    return _class_from_b(transition_count(w), nbrs)


def transition_map(edges: np.ndarray) -> np.ndarray:
    """Vectorised b for every pixel of the map (0 off the edge set)."""
    e = np.pad(np.asarray(edges, dtype=np.int8), 1)
    h, w = edges.shape
    ring = [e[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] for dr, dc in RING]
    b = np.zeros((h, w), dtype=np.int8)
    for i in range(8):
        b += np.abs(ring[(i + 1) % 8] - ring[i])
    return np.where(edges, b, 0)


def classify_map(edges: np.ndarray) -> np.ndarray:
    """Return an object array of PixelClass (None off the edge set)."""
    edges = np.asarray(edges, dtype=bool)
    b = transition_map(edges)
    n = neighbour_count(edges)
    out = np.full(edges.shape, None, dtype=object)
    for r, c in zip(*np.nonzero(edges)):
        out[r, c] = _class_from_b(int(b[r, c]), int(n[r, c]))
    return out


def trace_contours(edges: np.ndarray) -> list[EdgeContour]:
    """Link edge pixels into branchless chains.

    Ends are walked first (raster order), then junction branches, then any
    pixels left over (closed loops), seeded from their raster-first pixel.
    Junction pixels terminate chains and may appear as a terminal in several.
    """
    edges = np.asarray(edges, dtype=bool)
    h, w = edges.shape
    b = transition_map(edges)
    is_junction = edges & (b >= 6)
    is_end = edges & (b == 2)
    visited = np.zeros_like(edges)
    contours: list[list[tuple[int, int]]] = []
    closed_flags: list[bool] = []

    def step_candidates(r, c):
        for dr, dc in _STEP_ORDER:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and edges[rr, cc]:
                yield rr, cc

    def walk(path):
        # Extend path in place until an end/junction or a dead end.
        start = path[0]
        while True:
            r, c = path[-1]
            prev = path[-2] if len(path) > 1 else None
            junction_next = None
            free_next = None
            for rr, cc in step_candidates(r, c):
                if (rr, cc) == prev:
                    continue
                if is_junction[rr, cc]:
                    if (rr, cc) == start and len(path) < 4:
                        continue
                    if junction_next is None:
                        junction_next = (rr, cc)
                elif not visited[rr, cc] and free_next is None:
                    free_next = (rr, cc)
            nxt = junction_next or free_next
            if nxt is None:
                return
            path.append(nxt)
            if is_junction[nxt]:
                return
            visited[nxt] = True
            if is_end[nxt]:
                return

    for r, c in zip(*np.nonzero(is_end)):
        if visited[r, c]:
            continue
        visited[r, c] = True
        path = [(r, c)]
        walk(path)
        contours.append(path)
        closed_flags.append(False)

    for r, c in zip(*np.nonzero(is_junction)):
        for rr, cc in step_candidates(r, c):
            if visited[rr, cc] or is_junction[rr, cc]:
                continue
            visited[rr, cc] = True
            path = [(r, c), (rr, cc)]
            if not is_end[rr, cc]:
                walk(path)
            contours.append(path)
            closed_flags.append(False)

    leftover = edges & ~visited & ~is_junction
    for r, c in zip(*np.nonzero(leftover)):
        if visited[r, c]:
            continue
        visited[r, c] = True
        fwd = [(r, c)]
        walk(fwd)
        back = [(r, c)]
        walk(back)
        path = back[:0:-1] + fwd
        first, last = path[0], path[-1]
        closed = (
            len(back) == 1
            and len(path) >= 4
            and max(abs(first[0] - last[0]), abs(first[1] - last[1])) <= 1
            and not is_junction[last]
        )
        contours.append(path)
        closed_flags.append(closed)

    out = []
    for path, closed in zip(contours, closed_flags):
        if len(path) < 2:
            continue
        px = np.array([(c + 1, r + 1) for r, c in path], dtype=np.int64)
        out.append(EdgeContour(px, closed=closed, id=len(out)))
    return out


def extract_contours(edges: np.ndarray, min_length: int = 5) -> list[EdgeContour]:
    """remove_isolated -> trace_contours -> drop chains shorter than min_length."""
    kept = [e for e in trace_contours(remove_isolated(edges)) if len(e) >= min_length]
    for i, e in enumerate(kept):
        e.id = i
    return kept


def contours_to_jsonl(contours) -> str:
    return "".join(e.to_json() + "\n" for e in contours)
