"""Writers for pipeline artifacts: JSON lines, CSV tables and SVG overlays."""

from __future__ import annotations

import base64
import csv
import io
import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

from .contours import contours_to_jsonl
from .hypotheses import EllipseHypothesis
from .polyline import LinearCue
from .saliency import SaliencyRecord

CUE_HEADER = ("x1", "y1", "x2", "y2", "contour_id")
DETECTION_HEADER = ("x", "y", "a", "b", "theta", "c", "a_align", "phi", "sigma")


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def cues_csv(cues: list[LinearCue]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CUE_HEADER)
    for c in cues:
        w.writerow([c.p1[0], c.p1[1], c.p2[0], c.p2[1], c.contour_id])
    return buf.getvalue()


def hypotheses_jsonl(hyps: list[EllipseHypothesis]) -> str:
    return "".join(h.to_json() + "\n" for h in hyps)


def detections_csv(pairs) -> str:
    """``pairs``: iterable of (EllipseHypothesis, SaliencyRecord)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DETECTION_HEADER)
    for h, r in pairs:
        p = h.params
        w.writerow([_fmt(v) for v in (p.x, p.y, p.a, p.b, p.theta, r.c, r.a, r.phi, r.sigma_add)])
    return buf.getvalue()


def _svg_open(width: int, height: int) -> str:
    # pixel (x, y) is drawn centred on (x - 0.5, y - 0.5) so it covers its cell
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n')


def cues_svg(cues: list[LinearCue], width: int, height: int) -> str:
    parts = [_svg_open(width, height), f'<rect width="{width}" height="{height}" fill="white"/>\n']
    for c in cues:
        parts.append(f'<line x1="{c.p1[0] - 0.5}" y1="{c.p1[1] - 0.5}" x2="{c.p2[0] - 0.5}" '
                     f'y2="{c.p2[1] - 0.5}" stroke="red" stroke-width="1"/>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def png_base64(image: np.ndarray) -> str:
    """PNG encoding of a gray/RGB uint8 array or a bool edge map (edges black)."""
    if image.dtype == bool:
        image = np.where(image, 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def overlay_svg(background: np.ndarray, ellipses, width: int, height: int) -> str:
    parts = [_svg_open(width, height),
             f'<image x="0" y="0" width="{width}" height="{height}" '
             f'href="data:image/png;base64,{png_base64(background)}"/>\n']
    for e in ellipses:
        p = getattr(e, "params", e)
        parts.append(f'<ellipse cx="{p.x - 0.5:.3f}" cy="{p.y - 0.5:.3f}" rx="{p.a:.3f}" ry="{p.b:.3f}" '
                     f'transform="rotate({math.degrees(p.theta):.4f} {p.x - 0.5:.3f} {p.y - 0.5:.3f})" '
                     f'fill="none" stroke="red" stroke-width="1.5"/>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def write_lines_outputs(out_dir: Path, result) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    h, w = result.edges.shape
    (out_dir / "contours.jsonl").write_text(contours_to_jsonl(result.contours))
    # cue contour_id and hypothesis group ids refer to these
    (out_dir / "smooth_edges.jsonl").write_text(contours_to_jsonl(result.smooth))
    (out_dir / "linear_cues.csv").write_text(cues_csv(result.cues))
    (out_dir / "linear_cues.svg").write_text(cues_svg(result.cues, w, h))


def write_detection_outputs(out_dir: Path, result, background: np.ndarray) -> None:
    write_lines_outputs(out_dir, result)
    h, w = result.edges.shape
    selected: list[tuple[EllipseHypothesis, SaliencyRecord]] = [
        (hyp, rec) for hyp, rec in zip(result.clustered, result.records) if rec.selected]
    (out_dir / "hypotheses.jsonl").write_text(hypotheses_jsonl(result.hypotheses))
    (out_dir / "detections.csv").write_text(detections_csv(selected))
    (out_dir / "overlay.svg").write_text(overlay_svg(background, [hyp for hyp, _ in selected], w, h))


def read_detections_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def read_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
