"""Ellipse parameters, direct least-squares conic fitting and point-to-ellipse
distance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class EllipseParams:
    """Center (x, y), semi-axes a >= b > 0, orientation theta in [0, pi)."""

    x: float
    y: float
    a: float
    b: float
    theta: float

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise ValueError(f"need a >= b > 0, got a={self.a}, b={self.b}")

    @classmethod
    def make(cls, x, y, a, b, theta) -> "EllipseParams":
        """Normalise axis order and angle range."""
        a, b = float(a), float(b)
        if b > a:
            a, b = b, a
            theta = theta + math.pi / 2
        theta = float(theta) % math.pi
        if abs(a - b) <= 1e-9 * a:
            theta = 0.0
        return cls(float(x), float(y), a, b, theta)

    def astuple(self):
        return (self.x, self.y, self.a, self.b, self.theta)

    def points(self, n: int = 360) -> np.ndarray:
        t = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
        return self.point_at(t)

    def point_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        c, s = math.cos(self.theta), math.sin(self.theta)
        u = self.a * np.cos(t)
        v = self.b * np.sin(t)
        return np.stack([self.x + c * u - s * v, self.y + s * u + c * v], axis=-1)

    def to_frame(self, pts) -> np.ndarray:
        """Coordinates in the ellipse's own axis frame."""
        pts = np.asarray(pts, dtype=np.float64)
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = pts[..., 0] - self.x
        dy = pts[..., 1] - self.y
        return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)

    def tangent_at(self, t) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        du = -self.a * np.sin(t)
        dv = self.b * np.cos(t)
        return np.stack([c * du - s * dv, s * du + c * dv], axis=-1)

    def conic(self) -> np.ndarray:
        """Coefficients (A, B, C, D, E, F) of A x^2 + B xy + C y^2 + D x + E y + F = 0."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        a2, b2 = self.a ** 2, self.b ** 2
        A = c * c / a2 + s * s / b2
        B = 2 * c * s * (1 / a2 - 1 / b2)
        C = s * s / a2 + c * c / b2
        x0, y0 = self.x, self.y
        D = -2 * A * x0 - B * y0
        E = -B * x0 - 2 * C * y0
        F = A * x0 * x0 + B * x0 * y0 + C * y0 * y0 - 1
        return np.array([A, B, C, D, E, F])


def conic_to_params(coef) -> EllipseParams:
    A, B, C, D, E, F = (float(v) for v in coef)
    disc = 4 * A * C - B * B
    if disc <= 0:
        raise FitError("conic is not an ellipse")
    x0 = (B * E - 2 * C * D) / disc
    y0 = (B * D - 2 * A * E) / disc
    f0 = F + (D * x0 + E * y0) / 2
    lam, vec = np.linalg.eigh(np.array([[A, B / 2], [B / 2, C]]))
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = -f0 / lam
    if not np.all(sq > 0) or not np.all(np.isfinite(sq)):
        raise FitError("imaginary or degenerate ellipse")
    # smallest |lambda| -> major axis
    order = np.argsort(np.abs(lam))
    a = math.sqrt(sq[order[0]])
    b = math.sqrt(sq[order[1]])
    v = vec[:, order[0]]
    theta = math.atan2(v[1], v[0])
    return EllipseParams.make(x0, y0, a, b, theta)


def _normalise(pts: np.ndarray):
    mean = pts.mean(axis=0)
    rel = pts - mean
    scale = math.sqrt((rel ** 2).sum(axis=1).mean() / 2.0)
    if scale == 0.0:
        raise FitError("all points coincide")
    return rel / scale, mean, scale


def fit_conic_direct(pts: np.ndarray) -> np.ndarray:
    """Ellipse-specific direct least squares (constraint 4AC - B^2 = 1), solved
    with the block decomposition of the 6x6 scatter matrix."""
    x, y = pts[:, 0], pts[:, 1]
    D1 = np.column_stack([x * x, x * y, y * y])
    D2 = np.column_stack([x, y, np.ones_like(x)])
    S1 = D1.T @ D1
    S2 = D1.T @ D2
    S3 = D2.T @ D2
    if np.linalg.cond(S3) > 1e12:
        raise FitError("degenerate point set (collinear)")
    T = -np.linalg.solve(S3, S2.T)
    M = S1 + S2 @ T
    M = np.vstack([M[2] / 2.0, -M[1], M[0] / 2.0])
    evals, evecs = np.linalg.eig(M)
    evecs = np.real(evecs)
    cond = 4 * evecs[0] * evecs[2] - evecs[1] ** 2
    ok = np.flatnonzero(cond > 0)
    if len(ok) == 0:
        raise FitError("no elliptic solution")
    k = ok[np.argmin(np.abs(np.real(evals[ok])))]
    a1 = evecs[:, k]
    return np.concatenate([a1, T @ a1])


def sampson_distances(coef, pts) -> np.ndarray:
    A, B, C, D, E, F = coef
    x, y = pts[:, 0], pts[:, 1]
    q = A * x * x + B * x * y + C * y * y + D * x + E * y + F
    gx = 2 * A * x + B * y + D
    gy = B * x + 2 * C * y + E
    g = np.hypot(gx, gy)
    return q / np.where(g > 0, g, np.finfo(float).tiny)


def fit_ellipse_direct_ls(pixels) -> tuple[EllipseParams, float]:
    """Fit an ellipse; returns (params, fit_error).

    fit_error is the RMS of the conic residual normalised by its gradient
    (first-order geometric distance), in pixels.
    """
    pts = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    if len(np.unique(pts, axis=0)) < 6:
        raise FitError("need at least 6 distinct points")
    norm, mean, scale = _normalise(pts)
    coef = fit_conic_direct(norm)
    p = conic_to_params(coef)
    params = EllipseParams.make(p.x * scale + mean[0], p.y * scale + mean[1],
                                p.a * scale, p.b * scale, p.theta)
    with np.errstate(over="ignore", invalid="ignore"):
        err = float(np.sqrt(np.mean(sampson_distances(coef, norm) ** 2))) * scale
    if not math.isfinite(err):
        err = math.inf
    return params, err


# ---------------------------------------------------------------------------
# Point-to-ellipse distance
# ---------------------------------------------------------------------------

def _stationarity(u, v, a, b, t):
    ct, st = np.cos(t), np.sin(t)
    f = (b * b - a * a) * st * ct + a * u * st - b * v * ct
    fp = (b * b - a * a) * (ct * ct - st * st) + a * u * ct + b * v * st
    return f, fp


def _newton_angles(u, v, a, b, t, iters=20):
    # minimise |(a cos t, b sin t) - (u, v)|^2 over the parametric angle t
    for _ in range(iters):
        f, fp = _stationarity(u, v, a, b, t)
        safe = np.abs(fp) > 1e-12
        step = np.where(safe, f / np.where(safe, fp, 1.0), 0.0)
        t = t - np.clip(step, -0.5, 0.5)
    return t


def _dense_distance(u, v, a, b, n):
    ts = np.linspace(0, 2 * math.pi, n, endpoint=False)
    bx, by = a * np.cos(ts), b * np.sin(ts)
    return np.sqrt(((u[:, None] - bx[None, :]) ** 2 + (v[:, None] - by[None, :]) ** 2).min(axis=1))


def distance_to_ellipse(pts, e: EllipseParams, dense: int = 720) -> np.ndarray:
    """Euclidean distance from each point to the ellipse boundary.

    Newton on the parametric angle from three starts (the radial angle, its
    eccentric-angle counterpart and the best of a coarse 64-sample scan);
    points where no start converges are settled by a dense boundary scan.
    """
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(0)
    loc = e.to_frame(pts)
    u, v = loc[:, 0], loc[:, 1]
    a, b = e.a, e.b
    coarse = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    cd = (u[:, None] - a * np.cos(coarse)) ** 2 + (v[:, None] - b * np.sin(coarse)) ** 2
    starts = (np.arctan2(a * v, b * u), np.arctan2(v, u), coarse[cd.argmin(axis=1)])
    best = np.full(len(pts), np.inf)
    converged = np.zeros(len(pts), dtype=bool)
    for start in starts:
        t = _newton_angles(u, v, a, b, start)
        d = np.hypot(a * np.cos(t) - u, b * np.sin(t) - v)
        f, _ = _stationarity(u, v, a, b, t)
        converged |= np.abs(f) <= 1e-9 * (a * a + a * (np.abs(u) + np.abs(v)))
        best = np.minimum(best, d)
    pending = ~converged
    if dense and pending.any():
        best[pending] = np.minimum(best[pending], _dense_distance(u[pending], v[pending], a, b, dense))
    return best
