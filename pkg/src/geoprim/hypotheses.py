"""Stage 1: elliptic hypothesis generation.

Each smooth edge votes for ellipse centers with triplets of its own pixels;
votes are binned and turned into edge-bin relationship scores. Edges are then
grouped longest-first with the candidates that lie in their search region and
have compatible convexity, and every group is verified with a direct
least-squares fit (residual bound C1, center-window bound C2).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contours import EdgeContour
from .ellipse import EllipseParams, FitError, fit_ellipse_direct_ls
from .geometry import (
    OUT_OF_REGION,
    BinGrid,
    NoRegionError,
    SearchRegion,
    associated_convexity_many,
    centers_from_triplets,
    search_region,
    tangent_directions,
)

MIN_TRIPLET_LENGTH = 9


class NoTripletsError(ValueError):
    pass


@dataclass
class CenterVote:
    edge_id: int
    S: int
    S_e: int
    histogram: dict[int, int]
    centers: np.ndarray | None = None


@dataclass(frozen=True)
class RelationshipScore:
    edge_id: int
    bin: int
    r: float


@dataclass
class EllipseHypothesis:
    params: EllipseParams
    group: list[int]
    fit_error: float
    center_bin: int
    edges: list[EdgeContour] = field(default_factory=list, repr=False, compare=False)

    @property
    def pixels(self) -> np.ndarray:
        return np.vstack([e.pixels for e in self.edges])

    def to_dict(self) -> dict:
        p = self.params
        return {"x": p.x, "y": p.y, "a": p.a, "b": p.b, "theta": p.theta,
                "fit_error": self.fit_error, "group": list(self.group), "bin": self.center_bin}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class Rejection:
    criterion: str  # "fit", "C1", "C2" or "no-common-bin"
    fit_error: float = math.nan


@dataclass
class StageOneConfig:
    S: int = 200
    bin_size: int = 10
    eps_b: float = 0.5
    d: int = 5
    D: int = 2
    seed: int = 0
    p: int = 3
    margin: int = 0
    tol_conv: float = 2.0
    max_bins: int = 3
    region_mode: str = "longest"
    single_edge: str = "fallback"

    def __post_init__(self):
        for name in ("S", "bin_size", "d", "D", "p"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d % 2 == 0:
            raise ValueError("d must be odd")
        if self.eps_b <= 0:
            raise ValueError("eps_b must be positive")
        if self.region_mode not in ("longest", "all"):
            raise ValueError("region_mode must be 'longest' or 'all'")
        if self.single_edge not in ("fallback", "empty"):
            raise ValueError("single_edge must be 'fallback' or 'empty'")


# ---------------------------------------------------------------------------
# Voting
# ---------------------------------------------------------------------------

def edge_rng(seed: int, edge_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, edge_index]))


def sample_triplets(e: EdgeContour, S: int, rng: np.random.Generator) -> np.ndarray:
    """(S, 3) pixel indices, one uniform draw from each third of the chain."""
    n = len(e)
    if n < MIN_TRIPLET_LENGTH:
        raise NoTripletsError(f"contour of length {n} is too short")
    if S == 0:
        return np.zeros((0, 3), dtype=np.int64)
    thirds = np.array_split(np.arange(n), 3)
    cols = [rng.integers(t[0], t[-1] + 1, size=S) for t in thirds]
    return np.stack(cols, axis=1)


def vote_centers(e: EdgeContour, triplets: np.ndarray, grid: BinGrid, p: int = 3) -> CenterVote:
    S = len(triplets)
    if S == 0:
        return CenterVote(e.id, 0, 0, {})
    dirs, ok = tangent_directions(e, p)
    P = e.pixels[triplets].astype(np.float64)
    D = dirs[triplets]
    centers, valid = centers_from_triplets(P, D)
    valid &= ok[triplets].all(axis=1)
    bins = grid.bins_of(np.where(valid[:, None], centers, -1.0))
    bins = bins[valid & (bins != OUT_OF_REGION)]
    ids, counts = np.unique(bins, return_counts=True)
    hist = {int(b): int(c) for b, c in zip(ids, counts)}
    return CenterVote(e.id, S, int(counts.sum()) if len(counts) else 0, hist, centers[valid])


def r1(frac: float) -> float:
    return frac * math.exp(frac - 1.0)


def r2(frac: float) -> float:
    return frac * math.exp(2.0 * (frac - 1.0))


def relationship_scores(v: CenterVote) -> list[RelationshipScore]:
    """Scores sorted by decreasing r (ties by bin number)."""
    if v.S <= 0:
        raise ValueError("S must be positive")
    if v.S_e == 0:
        return []
    damp = r2(v.S_e / v.S)
    out = [RelationshipScore(v.edge_id, b, c * r1(c / v.S_e) * damp) for b, c in v.histogram.items()]
    out.sort(key=lambda s: (-s.r, s.bin))
    return out


# ---------------------------------------------------------------------------
# Grouping and verification
# ---------------------------------------------------------------------------

def group_and_verify(edges_with_scores, b: int, grid: BinGrid, eps_b: float, d: int):
    """Fit the pixels of the group (appended by decreasing score) and check
    C1 (fit error <= eps_b) and C2 (fitted center within the d x d bin window
    around b). Returns an EllipseHypothesis or a Rejection."""
    ranked = sorted(edges_with_scores, key=lambda es: -es[1])
    edges = [e for e, _ in ranked]
    pixels = np.vstack([e.pixels for e in edges])
    try:
        params, err = fit_ellipse_direct_ls(pixels)
    except (FitError, np.linalg.LinAlgError):
        return Rejection("fit")
    return _verify(params, err, edges, [b], grid, eps_b, d)


def _verify(params, err, edges, bins, grid, eps_b, d):
    if not err <= eps_b:
        return Rejection("C1", err)
    cbin = int(grid.bins_of((params.x, params.y))[0])
    for b in bins:
        if grid.in_window(b, cbin, d):
            return EllipseHypothesis(params, [e.id for e in edges], err, int(b), list(edges))
    return Rejection("C2", err)


class _StageOne:
    def __init__(self, contours, cfg: StageOneConfig, grid: BinGrid, threads: int):
        self.edges = list(contours)
        self.cfg = cfg
        self.grid = grid
        n = len(self.edges)
        self.lengths = np.array([len(e) for e in self.edges])
        self.scores: list[dict[int, float]] = self._vote_all(threads)
        self.regions: list[SearchRegion | None] = []
        for e in self.edges:
            try:
                self.regions.append(search_region(e, cfg.p))
            except NoRegionError:
                self.regions.append(None)
        self._all_pixels = np.vstack([e.pixels for e in self.edges]) if n else np.zeros((0, 2))
        self._starts = np.concatenate([[0], np.cumsum(self.lengths)[:-1]]).astype(np.int64) if n else np.zeros(0, int)
        self._region_cache: dict[int, np.ndarray] = {}
        self._partner_cache: dict[int, np.ndarray] = {}
        self._fit_cache: dict[frozenset, object] = {}
        ends = np.array([[e.pixels[0], e.pixels[-1]] for e in self.edges], dtype=np.float64) if n else None
        self._ends = ends

    def _vote_one(self, i):
        e = self.edges[i]
        if len(e) < MIN_TRIPLET_LENGTH:
            return {}
        trip = sample_triplets(e, self.cfg.S, edge_rng(self.cfg.seed, i))
        vote = vote_centers(e, trip, self.grid, self.cfg.p)
        return {s.bin: s.r for s in relationship_scores(vote)}

    def _vote_all(self, threads):
        idx = range(len(self.edges))
        if threads > 1 and len(self.edges) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(self._vote_one, idx))
        return [self._vote_one(i) for i in idx]

    # candidate relations ------------------------------------------------
    def _in_region_all(self, i) -> np.ndarray:
        """Bool per edge: edge lies entirely in the search region of edge i."""
        hit = self._region_cache.get(i)
        if hit is None:
            reg = self.regions[i]
            if reg is None or len(self.edges) == 0:
                hit = np.zeros(len(self.edges), dtype=bool)
            else:
                mask = reg.pixel_mask(self._all_pixels)
                hit = np.logical_and.reduceat(mask, self._starts)
                hit[i] = False
            self._region_cache[i] = hit
        return hit

    def _partners(self, i) -> np.ndarray:
        """Bool per edge: inside the search region of edge i with associated
        convexity."""
        ok = self._partner_cache.get(i)
        if ok is None:
            ok = self._in_region_all(i).copy()
            idx = np.flatnonzero(ok)
            if len(idx):
                ok[idx] = associated_convexity_many(self.edges[i], [self.edges[j] for j in idx],
                                                    self.cfg.tol_conv)
            self._partner_cache[i] = ok
        return ok

    def _anchors(self, G):
        if self.cfg.region_mode == "all":
            return list(G)
        return [max(G, key=lambda k: (self.lengths[k], -k))]

    def _distance(self, G, cand: np.ndarray) -> np.ndarray:
        """Minimum endpoint-to-endpoint distance from G to each candidate."""
        g = self._ends[list(G)].reshape(-1, 2)
        c = self._ends[cand]  # (J, 2, 2)
        diff = c[:, :, None, :] - g[None, None, :, :]
        return np.sqrt((diff ** 2).sum(axis=3)).min(axis=(1, 2))

    def candidates(self, G) -> list[int]:
        mask = np.ones(len(self.edges), dtype=bool)
        for a in self._anchors(G):
            mask &= self._partners(a)
        mask[list(G)] = False
        cand = np.flatnonzero(mask)
        if len(cand) == 0:
            return []
        dist = self._distance(G, cand)
        order = np.lexsort((cand, dist))
        return [int(j) for j in cand[order]]

    # verification -------------------------------------------------------
    def common_bins(self, members) -> list[int]:
        common = None
        for k in members:
            keys = set(self.scores[k])
            common = keys if common is None else common & keys
            if not common:
                return []
        return sorted(common, key=lambda b: (-sum(self.scores[k][b] for k in members), b))[: self.cfg.max_bins]

    def try_group(self, members):
        bins = self.common_bins(members)
        if not bins:
            return Rejection("no-common-bin")
        top = bins[0]
        ranked = sorted(members, key=lambda k: (-self.scores[k][top], k))
        key = frozenset(members)
        fit = self._fit_cache.get(key)
        if fit is None:
            pixels = np.vstack([self.edges[k].pixels for k in ranked])
            try:
                fit = fit_ellipse_direct_ls(pixels)
            except (FitError, np.linalg.LinAlgError):
                fit = Rejection("fit")
            self._fit_cache[key] = fit
        if isinstance(fit, Rejection):
            return fit
        params, err = fit
        return _verify(params, err, [self.edges[k] for k in ranked], bins, self.grid, self.cfg.eps_b, self.cfg.d)

    def run(self) -> list[EllipseHypothesis]:
        order = sorted(range(len(self.edges)), key=lambda k: (-self.lengths[k], k))
        out: list[EllipseHypothesis] = []
        seen: set[frozenset] = set()

        def emit(h):
            key = frozenset(h.group)
            if key not in seen:
                seen.add(key)
                out.append(h)

        for i in order:
            if not self.scores[i]:
                continue
            G = [i]
            cycles = 0
            grouped = False
            had_candidates = False
            while cycles < self.cfg.D:
                cand = self.candidates(G)
                had_candidates |= bool(cand)
                accepted = None
                for j in cand:
                    if not self.scores[j]:
                        continue
                    res = self.try_group(G + [j])
                    if isinstance(res, EllipseHypothesis):
                        accepted = (j, res)
                        break
                if accepted is None:
                    break
                G = G + [accepted[0]]
                emit(accepted[1])
                grouped = True
                cycles += 1
            if not grouped and (self.cfg.single_edge == "fallback" or not had_candidates):
                res = self.try_group([i])
                if isinstance(res, EllipseHypothesis):
                    emit(res)
        return out


def stage1_detect(contours, cfg: StageOneConfig, width: int, height: int, threads: int = 1) -> list[EllipseHypothesis]:
    """Generate elliptic hypotheses from smooth contours.

    Contour ids are taken from their position in ``contours``.
    """
    contours = list(contours)
    for k, e in enumerate(contours):
        e.id = k
    grid = BinGrid.for_image(width, height, cfg.bin_size, cfg.margin)
    return _StageOne(contours, cfg, grid, threads).run()
