"""Per-image luminance metrics used by the curation pipeline.

All metrics operate on 2-D float64 luminance arrays with values in
[0, 255].  Sharpness is the population variance of a 4-neighbour
Laplacian, edge density counts Sobel gradient magnitudes above a
threshold, texture richness comes from gray-level co-occurrence
matrices and content complexity from the Shannon entropy of the
intensity histogram.  Everything is pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SelectionConfig
from .errors import InvalidInputError

__all__ = [
    "GlcmFeatures",
    "MetricVector",
    "to_grayscale",
    "downsample",
    "laplacian_variance",
    "sobel_edge_density",
    "quantize_levels",
    "glcm",
    "glcm_features",
    "glcm_offsets",
    "glcm_score",
    "shannon_entropy",
    "compute_metrics",
]

_BT601 = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GlcmFeatures:
    """Scalar features of one normalized co-occurrence matrix."""

    contrast: float
    entropy: float
    correlation: float
    degenerate: bool


@dataclass
class MetricVector:
    """All per-image metrics; aesthetic is filled in later by the pipeline."""

    laplacian_var: float
    sobel_edge_density: float
    glcm_directions: tuple[GlcmFeatures, ...]
    glcm_aggregate: float
    shannon_entropy: float
    aesthetic: float | None = None


def _as_gray(img, min_side: int = 2) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"expected a 2-D luminance array, got shape {a.shape}")
    h, w = a.shape
    if h < min_side or w < min_side:
        raise InvalidInputError(f"image must be at least {min_side}x{min_side}, got {h}x{w}")
    if not np.isfinite(a).all():
        raise InvalidInputError("image contains non-finite values")
    if a.min() < 0.0 or a.max() > 255.0:
        raise InvalidInputError("luminance values must lie in [0, 255]")
    return a


def to_grayscale(rgb) -> np.ndarray:
    """BT.601 luma: 0.299 R + 0.587 G + 0.114 B, kept at float precision.

    Values are clamped to [0, 255] to absorb the last-ulp overshoot of
    the weight sum (the three weights add to 1 only in decimal).
    """
    a = np.asarray(rgb, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3:
        raise InvalidInputError(f"expected an H x W x 3 array, got shape {a.shape}")
    if a.shape[0] < 2 or a.shape[1] < 2:
        raise InvalidInputError(f"image must be at least 2x2, got {a.shape[0]}x{a.shape[1]}")
    if not np.isfinite(a).all():
        raise InvalidInputError("image contains non-finite values")
    if a.min() < 0.0 or a.max() > 255.0:
        raise InvalidInputError("channel values must lie in [0, 255]")
    luma = _BT601[0] * a[:, :, 0] + _BT601[1] * a[:, :, 1] + _BT601[2] * a[:, :, 2]
    return np.clip(luma, 0.0, 255.0)


def _resample_axis(a: np.ndarray, out_n: int, axis: int) -> np.ndarray:
    """Box (area-average) resample along one axis."""
    in_n = a.shape[axis]
    if out_n == in_n:
        return a
    if in_n % out_n == 0:
        k = in_n // out_n
        if axis == 0:
            return a.reshape(out_n, k, a.shape[1]).mean(axis=1)
        return a.reshape(a.shape[0], out_n, k).mean(axis=2)
    # Fractional factor: output cell i covers [i*in_n, (i+1)*in_n) in
    # units of 1/out_n of an input pixel, so overlap weights are exact
    # integers.
    moved = np.moveaxis(a, axis, 0)
    out = np.empty((out_n,) + moved.shape[1:], dtype=np.float64)
    for i in range(out_n):
        start_u = i * in_n
        end_u = (i + 1) * in_n
        j0 = start_u // out_n
        j1 = (end_u + out_n - 1) // out_n
        acc = np.zeros(moved.shape[1:], dtype=np.float64)
        total = 0
        for j in range(j0, min(j1, in_n)):
            overlap = min(end_u, (j + 1) * out_n) - max(start_u, j * out_n)
            if overlap > 0:
                acc += overlap * moved[j]
                total += overlap
        out[i] = acc / total
    return np.moveaxis(out, 0, axis)


def downsample(img, target_long_side: int) -> np.ndarray:
    """Area-average downsample so the long side is target_long_side.

    Aspect ratio is preserved; each output axis is clamped to >= 1
    pixel.  An image already at or below the target is returned
    unchanged.
    """
    a = _as_gray(img, min_side=1)
    t = int(target_long_side)
    if t < 1:
        raise InvalidInputError(f"target_long_side must be >= 1, got {target_long_side!r}")
    h, w = a.shape
    if max(h, w) <= t:
        return a
    if h >= w:
        out_h = t
        out_w = max(1, round(w * t / h))
    else:
        out_w = t
        out_h = max(1, round(h * t / w))
    return _resample_axis(_resample_axis(a, out_h, axis=0), out_w, axis=1)


def laplacian_variance(img) -> float:
    """Population variance of the 4-neighbour Laplacian over interior pixels.

    Kernel [[0,1,0],[1,-4,1],[0,1,0]], no padding; images smaller than
    3x3 have no interior and are rejected.
    """
    a = _as_gray(img, min_side=3)
    resp = a[:-2, 1:-1] + a[2:, 1:-1] + a[1:-1, :-2] + a[1:-1, 2:] - 4.0 * a[1:-1, 1:-1]
    return float(resp.var())


def sobel_edge_density(img, grad_threshold: float) -> float:
    """Fraction of interior pixels whose Sobel gradient magnitude exceeds the threshold."""
    a = _as_gray(img, min_side=3)
    thr = float(grad_threshold)
    if thr < 0.0:
        raise InvalidInputError(f"grad_threshold must be >= 0, got {grad_threshold!r}")
    top, mid, bot = a[:-2], a[1:-1], a[2:]
    gx = (top[:, 2:] + 2.0 * mid[:, 2:] + bot[:, 2:]) - (top[:, :-2] + 2.0 * mid[:, :-2] + bot[:, :-2])
    gy = (bot[:, :-2] + 2.0 * bot[:, 1:-1] + bot[:, 2:]) - (top[:, :-2] + 2.0 * top[:, 1:-1] + top[:, 2:])
    mag = np.sqrt(gx * gx + gy * gy)
    return float(np.count_nonzero(mag > thr) / mag.size)


def quantize_levels(img, levels: int) -> np.ndarray:
    """Map [0, 255] values to integer levels via floor(v / 256 * levels)."""
    a = _as_gray(img, min_side=1)
    lv = int(levels)
    if not 2 <= lv <= 256:
        raise InvalidInputError(f"levels must be in [2, 256], got {levels!r}")
    idx = np.floor(a * (lv / 256.0)).astype(np.int64)
    return np.minimum(idx, lv - 1)


def glcm_offsets(distance: int) -> tuple[tuple[int, int], ...]:
    """(dx, dy) displacement for each of the four standard directions."""
    d = int(distance)
    if d < 1:
        raise InvalidInputError(f"distance must be >= 1, got {distance!r}")
    return ((d, 0), (d, d), (0, d), (-d, d))


def glcm(indexed, levels: int, offset: tuple[int, int]) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix for one displacement.

    Pairs image[y, x] with image[y + dy, x + dx] for every in-bounds
    position, accumulates counts, adds the transpose and normalizes to
    sum 1.
    """
    a = np.asarray(indexed)
    if a.ndim != 2 or a.size == 0:
        raise InvalidInputError(f"expected a non-empty 2-D indexed image, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.integer):
        raise InvalidInputError(f"indexed image must have an integer dtype, got {a.dtype}")
    lv = int(levels)
    if lv < 2:
        raise InvalidInputError(f"levels must be >= 2, got {levels!r}")
    if a.min() < 0 or a.max() >= lv:
        raise InvalidInputError(f"indexed values must lie in [0, {lv - 1}]")
    dx, dy = int(offset[0]), int(offset[1])
    if dx == 0 and dy == 0:
        raise InvalidInputError("offset (0, 0) is not a valid displacement")
    h, w = a.shape
    y0, y1 = max(0, -dy), h - max(0, dy)
    x0, x1 = max(0, -dx), w - max(0, dx)
    if y1 <= y0 or x1 <= x0:
        raise InvalidInputError(f"offset {offset} admits no pixel pairs in a {h}x{w} image")
    src = a[y0:y1, x0:x1].astype(np.int64)
    dst = a[y0 + dy:y1 + dy, x0 + dx:x1 + dx].astype(np.int64)
    codes = src * lv + dst
    counts = np.bincount(codes.ravel(), minlength=lv * lv).reshape(lv, lv)
    sym = counts + counts.T
    return sym / float(sym.sum())


def glcm_features(matrix) -> GlcmFeatures:
    """Contrast, entropy (nats) and correlation of a normalized GLCM.

    contrast    = sum p(i,j) (i - j)^2
    entropy     = -sum p log p over nonzero entries
    correlation = sum (i - mu_i)(j - mu_j) p / (sigma_i sigma_j)

    A matrix whose marginal variance vanishes (all mass at one level)
    has undefined correlation; it is reported as 0.0 with the
    degenerate flag set.
    """
    p = np.asarray(matrix, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
        raise InvalidInputError(f"expected a square matrix, got shape {p.shape}")
    if (p < 0.0).any():
        raise InvalidInputError("matrix entries must be non-negative")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise InvalidInputError(f"matrix must be normalized to sum 1, got sum {p.sum()!r}")
    n = p.shape[0]
    i = np.arange(n, dtype=np.float64)
    diff = i[:, None] - i[None, :]
    contrast = float((p * diff * diff).sum())
    nz = p[p > 0.0]
    entropy = float(-(nz * np.log(nz)).sum() + 0.0)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_i = float((i * px).sum())
    mu_j = float((i * py).sum())
    var_i = float(((i - mu_i) ** 2 * px).sum())
    var_j = float(((i - mu_j) ** 2 * py).sum())
    if var_i == 0.0 or var_j == 0.0:
        return GlcmFeatures(contrast, entropy, 0.0, True)
    cov = float((((i[:, None] - mu_i) * (i[None, :] - mu_j)) * p).sum())
    corr = cov / float(np.sqrt(var_i * var_j))
    corr = min(1.0, max(-1.0, corr))
    return GlcmFeatures(contrast, entropy, corr, False)


def glcm_score(img, levels: int = 32, distance: int = 1) -> tuple[tuple[GlcmFeatures, ...], float]:
    """Per-direction GLCM features plus the scalar detail-richness score.

    The aggregate is the mean over the four directions of
    contrast + entropy; correlation is reported but deliberately kept
    out of the aggregate because its degenerate cases would poison
    flat images.
    """
    a = _as_gray(img, min_side=1)
    d = int(distance)
    offsets = glcm_offsets(d)
    h, w = a.shape
    if h <= d or w <= d:
        raise InvalidInputError(f"image {h}x{w} is too small for distance {d} in all four directions")
    q = quantize_levels(a, levels)
    feats = tuple(glcm_features(glcm(q, levels, off)) for off in offsets)
    aggregate = float(np.mean([f.contrast + f.entropy for f in feats]))
    return feats, aggregate


def shannon_entropy(img) -> float:
    """Entropy in bits of the 256-bin intensity histogram.

    Pixel values are rounded to the nearest integer before binning,
    so the result lies in [0, 8].
    """
    a = _as_gray(img, min_side=1)
    hist = np.bincount(np.rint(a).astype(np.int64).ravel(), minlength=256)
    p = hist[hist > 0] / float(a.size)
    return float(-(p * np.log2(p)).sum() + 0.0)


def compute_metrics(img, cfg: SelectionConfig) -> MetricVector:
    """Full metric vector for one image.

    Sharpness and edge density run at native resolution; the GLCM score
    and entropy run on an area-averaged copy whose long side is capped
    at cfg.metric_long_side, which keeps the texture statistics
    comparable across wildly different resolutions.
    """
    a = _as_gray(img, min_side=2)
    lap = laplacian_variance(a)
    sed = sobel_edge_density(a, cfg.sobel_grad_threshold)
    small = downsample(a, cfg.metric_long_side)
    feats, aggregate = glcm_score(small, cfg.glcm_levels, cfg.glcm_distance)
    ent = shannon_entropy(small)
    return MetricVector(
        laplacian_var=lap,
        sobel_edge_density=sed,
        glcm_directions=feats,
        glcm_aggregate=aggregate,
        shannon_entropy=ent,
        aesthetic=None,
    )
