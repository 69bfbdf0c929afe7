import math

import numpy as np
import pytest

from geoprim.benchmark import boundary_pixels
from geoprim.contours import EdgeContour
from geoprim.ellipse import EllipseParams


def ellipse_edge_map(e: EllipseParams, width: int = 300, height: int = 300) -> np.ndarray:
    img = np.zeros((height, width), dtype=bool)
    px = boundary_pixels(e, width, height)
    img[px[:, 1] - 1, px[:, 0] - 1] = True
    return img


def ellipse_arc(e: EllipseParams, t0: float, t1: float, cid: int = 0) -> EdgeContour:
    """Open contour: the raster boundary pixels whose parametric angle lies in [t0, t1]."""
    px = boundary_pixels(e)
    loc = e.to_frame(px)
    t = np.mod(np.arctan2(loc[:, 1] / e.b, loc[:, 0] / e.a) - t0, 2 * math.pi)
    keep = t <= (t1 - t0)
    # rotate so the chain starts right after the excluded stretch
    idx = np.flatnonzero(keep)
    if not keep.all():
        start = int(np.flatnonzero(~keep)[-1]) + 1
        order = np.roll(np.arange(len(px)), -start)
        px = px[order][keep[order]]
    else:
        px = px[idx]
    return EdgeContour(px, closed=False, id=cid)


def line_pixels(x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
    n = max(abs(x1 - x0), abs(y1 - y0))
    t = np.linspace(0.0, 1.0, n + 1)
    return np.stack([np.rint(x0 + t * (x1 - x0)), np.rint(y0 + t * (y1 - y0))], axis=1).astype(np.int64)


def draw(img: np.ndarray, px: np.ndarray) -> np.ndarray:
    img[px[:, 1] - 1, px[:, 0] - 1] = True
    return img


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
