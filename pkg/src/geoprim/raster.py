"""Image decoding and edge-map extraction.

Gray images are 2-D ``uint8`` arrays indexed ``[row, col]``; edge maps are
2-D ``bool`` arrays of the same shape with ``True`` marking an edge pixel.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImageFormatError(ValueError):
    """Raised when a file cannot be decoded as a supported raster."""


class CannyParameterError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Netpbm
# ---------------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_tokens(data: bytes, count: int, pos: int = 0):
    out = []
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ImageFormatError("truncated netpbm header")
        out.append(m.group(1))
        pos = m.end()
    return out, pos


def read_netpbm(path) -> np.ndarray:
    """Read a P1/P2/P4/P5 file.

    PBM files come back as a bool array (1 in the file = True = edge);
    PGM files come back as ``uint8`` gray levels rescaled to [0, 255].
    """
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P1", b"P2", b"P4", b"P5"):
        raise ImageFormatError(f"{path}: unsupported netpbm magic {magic!r}")
    is_bitmap = magic in (b"P1", b"P4")
    ntok = 2 if is_bitmap else 3
    try:
        toks, pos = _read_tokens(data, ntok, 2)
        width, height = int(toks[0]), int(toks[1])
        maxval = 1 if is_bitmap else int(toks[2])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: bad netpbm header") from exc
    if width < 1 or height < 1 or maxval < 1:
        raise ImageFormatError(f"{path}: bad netpbm dimensions")

    if magic == b"P1":
        body = re.sub(rb"#[^\n]*", b"", data[pos:])
        bits = np.frombuffer(bytes(c for c in body if c in b"01"), dtype=np.uint8) - ord("0")
        if bits.size < width * height:
            raise ImageFormatError(f"{path}: truncated P1 data")
        return bits[: width * height].reshape(height, width).astype(bool)
    if magic == b"P2":
        body = re.sub(rb"#[^\n]*", b"", data[pos:])
        vals = np.array(body.split(), dtype=np.int64)
        if vals.size < width * height:
            raise ImageFormatError(f"{path}: truncated P2 data")
        vals = vals[: width * height].reshape(height, width)
        return _rescale(vals, maxval)

    # binary formats: exactly one whitespace byte after the header
    pos += 1
    if magic == b"P4":
        row_bytes = (width + 7) // 8
        if len(data) - pos < row_bytes * height:
            raise ImageFormatError(f"{path}: truncated P4 data")
        raw = np.frombuffer(data, dtype=np.uint8, count=row_bytes * height, offset=pos)
        bits = np.unpackbits(raw.reshape(height, row_bytes), axis=1)[:, :width]
        return bits.astype(bool)
    depth = 1 if maxval < 256 else 2
    need = width * height * depth
    if len(data) - pos < need:
        raise ImageFormatError(f"{path}: truncated P5 data")
    dtype = np.uint8 if depth == 1 else np.dtype(">u2")
    vals = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return _rescale(vals.reshape(height, width).astype(np.int64), maxval)


def _rescale(vals: np.ndarray, maxval: int) -> np.ndarray:
    if maxval == 255:
        return np.clip(vals, 0, 255).astype(np.uint8)
    return np.clip(np.rint(vals * (255.0 / maxval)), 0, 255).astype(np.uint8)


def write_pbm(path, edges: np.ndarray, binary: bool = True) -> None:
    """Write an edge map as P4 (``binary=True``) or P1."""
    edges = np.asarray(edges, dtype=bool)
    height, width = edges.shape
    if binary:
        packed = np.packbits(edges.astype(np.uint8), axis=1)
        Path(path).write_bytes(b"P4\n%d %d\n" % (width, height) + packed.tobytes())
    else:
        lines = [" ".join("1" if v else "0" for v in row) for row in edges]
        Path(path).write_text(f"P1\n{width} {height}\n" + "\n".join(lines) + "\n")


def load_raster(path):
    """Decode PNG/PGM/PBM. Returns a bool edge map for PBM, else an image array."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(str(path))
    head = path.read_bytes()[:2]
    if head in (b"P1", b"P2", b"P4", b"P5"):
        return read_netpbm(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB", "RGBA", "LA"):
                im = im.convert("RGB")
            return np.asarray(im)
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"{path}: cannot decode image") from exc


# ---------------------------------------------------------------------------
# Gray conversion and equalization
# ---------------------------------------------------------------------------

def to_grayscale(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 2:
        if image.dtype == bool:
            return np.where(image, 255, 0).astype(np.uint8)
        return image.astype(np.uint8, copy=False)
    if image.ndim != 3 or image.shape[2] not in (2, 3, 4):
        raise ImageFormatError(f"unsupported image shape {image.shape}")
    if image.shape[2] == 2:  # gray + alpha
        return image[..., 0].astype(np.uint8)
    rgb = image[..., :3].astype(np.float64)
    wr, wg, wb = LUMA_WEIGHTS
    gray = wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2]
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def equalize_histogram(gray: np.ndarray) -> np.ndarray:
    """Cumulative-histogram remap over 256 levels.

    Uses ``round((cdf - cdf_min) / (N - cdf_min) * 255)``; a constant image is
    returned unchanged.
    """
    gray = np.asarray(gray, dtype=np.uint8)
    hist = np.bincount(gray.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    cdf_min = cdf[np.flatnonzero(hist)[0]]
    total = gray.size
    if total == cdf_min:
        return gray.copy()
    lut = np.rint((cdf - cdf_min) / (total - cdf_min) * 255.0)
    lut = np.clip(lut, 0, 255).astype(np.uint8)
    return lut[gray]


# ---------------------------------------------------------------------------
# Canny
# ---------------------------------------------------------------------------

def gradient(gray: np.ndarray, sigma: float):
    """Gaussian-smoothed Sobel gradient: returns (magnitude, gx, gy)."""
    smooth = ndimage.gaussian_filter(np.asarray(gray, dtype=np.float64), sigma, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    return np.hypot(gx, gy), gx, gy


def _non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    # Sector of the gradient direction, folded into [0, 180).
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = (np.floor((angle + 22.5) / 45.0).astype(int)) % 4
    # zero outside the frame so border pixels can still be local maxima
    padded = np.pad(mag, 1, mode="constant")
    h, w = mag.shape

    def shifted(dr, dc):
        return padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]

    # (dr, dc) of the "forward" neighbour along the gradient for each sector
    offsets = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    keep = np.zeros_like(mag, dtype=bool)
    for s, (dr, dc) in offsets.items():
        fwd = shifted(dr, dc)
        bwd = shifted(-dr, -dc)
        # asymmetric comparison so a two-pixel plateau keeps exactly one pixel
        ok = (mag > fwd) & (mag >= bwd)
        keep |= (sector == s) & ok
    return keep & (mag > 0)


def canny(gray: np.ndarray, t_low: float = 0.1, t_high: float = 0.2, sigma: float = 1.0) -> np.ndarray:
    """Canny edge map with thresholds given as fractions of the peak gradient."""
    if not (0.0 <= t_low < t_high <= 1.0):
        raise CannyParameterError(f"need 0 <= t_low < t_high <= 1, got {t_low}, {t_high}")
    if sigma <= 0:
        raise CannyParameterError(f"sigma must be positive, got {sigma}")
    mag, gx, gy = gradient(gray, sigma)
    peak = mag.max()
    if peak <= 1e-9:
        return np.zeros(mag.shape, dtype=bool)
    thin = _non_max_suppression(mag, gx, gy)
    weak = thin & (mag >= t_low * peak)
    strong = thin & (mag >= t_high * peak)
    labels, count = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return np.zeros(mag.shape, dtype=bool)
    has_strong = np.zeros(count + 1, dtype=bool)
    has_strong[np.unique(labels[strong])] = True
    has_strong[0] = False
    return has_strong[labels]


def edge_map_from_image(image: np.ndarray, t_low=0.1, t_high=0.2, sigma=1.0, equalize=True) -> np.ndarray:
    gray = to_grayscale(image)
    if equalize:
        gray = equalize_histogram(gray)
    return canny(gray, t_low, t_high, sigma)
