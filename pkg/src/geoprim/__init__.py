"""Geometric primitive extraction: edge contours, linear cues and ellipses."""

from .config import PipelineConfig
from .contours import EdgeContour, extract_contours
from .ellipse import EllipseParams, fit_ellipse_direct_ls
from .hypotheses import EllipseHypothesis, StageOneConfig, stage1_detect
from .pipeline import DetectionResult, detect_ellipses, detect_file, find_lines
from .polyline import LinearCue, PolylineApprox, rdp_fit, smooth_segments
from .saliency import SaliencyRecord, cluster_similar, select_salient

__version__ = "0.1.0"

__all__ = [
    "DetectionResult",
    "EdgeContour",
    "EllipseHypothesis",
    "EllipseParams",
    "LinearCue",
    "PipelineConfig",
    "PolylineApprox",
    "SaliencyRecord",
    "StageOneConfig",
    "cluster_similar",
    "detect_ellipses",
    "detect_file",
    "extract_contours",
    "find_lines",
    "fit_ellipse_direct_ls",
    "rdp_fit",
    "select_salient",
    "smooth_segments",
    "stage1_detect",
]
