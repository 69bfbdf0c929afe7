"""End-to-end orchestration: edge map -> contours -> smooth edges -> ellipses."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .contours import EdgeContour, extract_contours
from .hypotheses import EllipseHypothesis, StageOneConfig, stage1_detect
from .polyline import LinearCue, extract_linear_cues, rdp_fit, smooth_segments
from .raster import edge_map_from_image, load_raster
from .saliency import SaliencyRecord, SimilarityTolerances, cluster_similar, select_salient


@dataclass
class LineResult:
    edges: np.ndarray
    contours: list[EdgeContour]
    smooth: list[EdgeContour]
    cues: list[LinearCue]


@dataclass
class DetectionResult(LineResult):
    hypotheses: list[EllipseHypothesis] = field(default_factory=list)
    clustered: list[EllipseHypothesis] = field(default_factory=list)
    records: list[SaliencyRecord] = field(default_factory=list)
    detections: list[EllipseHypothesis] = field(default_factory=list)

    def selected_records(self) -> list[SaliencyRecord]:
        return [r for r in self.records if r.selected]


def stage_one_config(cfg: PipelineConfig) -> StageOneConfig:
    return StageOneConfig(S=cfg.S, bin_size=cfg.bin, eps_b=cfg.eps_b, d=cfg.d, D=cfg.D,
                          seed=cfg.seed, p=cfg.p, margin=cfg.margin, tol_conv=cfg.tol_conv,
                          region_mode=cfg.region_mode, single_edge=cfg.single_edge)


def load_edge_map(path, cfg: PipelineConfig) -> np.ndarray:
    """Bool edge map for an input file; PBM files are taken as edge maps as-is."""
    data = load_raster(path)
    if data.dtype == bool:
        return data
    return edge_map_from_image(data, cfg.t_low, cfg.t_high, cfg.sigma, cfg.equalize)


def find_lines(edges: np.ndarray, cfg: PipelineConfig) -> LineResult:
    contours = extract_contours(edges, cfg.min_contour_length)
    smooth = smooth_segments(contours, cfg.rdp_tol, cfg.theta0_rad)
    smooth = [e for e in smooth if len(e) >= cfg.min_contour_length]
    for k, e in enumerate(smooth):
        e.id = k
    approxes = [rdp_fit(e, cfg.rdp_tol) for e in smooth]
    return LineResult(edges, contours, smooth, extract_linear_cues(smooth, approxes))


def detect_ellipses(edges: np.ndarray, cfg: PipelineConfig, threads: int = 1) -> DetectionResult:
    lines = find_lines(edges, cfg)
    height, width = edges.shape
    hyps = stage1_detect(lines.smooth, stage_one_config(cfg), width, height, threads)
    clustered = cluster_similar(hyps, width, height, SimilarityTolerances.uniform(cfg.sim_tols))
    selected, records = select_salient(clustered, cfg.d0, cfg.p)
    return DetectionResult(edges, lines.contours, lines.smooth, lines.cues,
                           hyps, clustered, records, selected)


def detect_file(path: str | Path, cfg: PipelineConfig, threads: int = 1) -> DetectionResult:
    return detect_ellipses(load_edge_map(path, cfg), cfg, threads)
