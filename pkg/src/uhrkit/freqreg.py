"""Spectral loss with radially increasing soft weights.

The transform pair is the orthonormal 2-D DFT (both directions scaled
by 1/sqrt(H*W), so Parseval holds exactly) with the zero-frequency bin
shifted to (H//2, W//2).  Each spectral bin gets a weight

    w(r) = 1 + lam * (exp(gamma * r) - 1) / (exp(gamma) - 1)

where r in [0, 1] is the distance from the centre bin divided by the
distance to the farthest corner.  The loss is the weighted mean squared
spectral difference

    L(x, y) = (1 / (H * W)) * sum |w * (X - Y)|^2

which for lam = 0 collapses to the plain spatial MSE.  The gradient
with respect to x is (2 / (H * W)) * idft2(w^2 * (X - Y)), which is
real because w is symmetric under frequency negation.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .config import FreqRegConfig
from .errors import InvalidInputError

__all__ = [
    "dft2",
    "idft2",
    "radial_field",
    "soft_weight",
    "weight_field",
    "freq_loss",
    "freq_loss_grad",
    "band_energies",
]


def _as_field(x, name: str = "x") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 2 or a.shape[1] < 2:
        raise InvalidInputError(f"{name} must be at least 2x2, got {a.shape[0]}x{a.shape[1]}")
    if not np.isfinite(a).all():
        raise InvalidInputError(f"{name} contains non-finite values")
    return a


def dft2(x) -> np.ndarray:
    """Orthonormal forward DFT with the zero-frequency bin at (H//2, W//2)."""
    a = _as_field(x)
    return np.fft.fftshift(np.fft.fft2(a, norm="ortho"))


def idft2(s) -> np.ndarray:
    """Inverse of dft2, returning the real part.

    For spectra of real fields the imaginary residue is rounding noise;
    it is checked against 1e-9 (relative to the field magnitude) so a
    genuinely complex-valued result cannot pass silently.
    """
    a = np.asarray(s, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise InvalidInputError(f"spectrum must be 2-D and at least 2x2, got shape {a.shape}")
    if not np.isfinite(a.real).all() or not np.isfinite(a.imag).all():
        raise InvalidInputError("spectrum contains non-finite values")
    out = np.fft.ifft2(np.fft.ifftshift(a), norm="ortho")
    scale = max(1.0, float(np.abs(out.real).max()))
    residue = float(np.abs(out.imag).max())
    if residue >= 1e-9 * scale:
        raise InvalidInputError(f"inverse transform is not real (imaginary residue {residue:g})")
    return np.ascontiguousarray(out.real)


@lru_cache(maxsize=64)
def _radial_field_cached(h: int, w: int) -> np.ndarray:
    cy, cx = h // 2, w // 2
    dy = np.arange(h, dtype=np.float64) - cy
    dx = np.arange(w, dtype=np.float64) - cx
    dist = np.sqrt(dy[:, None] ** 2 + dx[None, :] ** 2)
    corner = float(np.hypot(max(cy, h - 1 - cy), max(cx, w - 1 - cx)))
    out = dist / corner
    out.setflags(write=False)
    return out


def radial_field(h: int, w: int) -> np.ndarray:
    """Normalized distance of every spectral bin from the centre bin.

    The centre (h//2, w//2) maps to 0 and the farthest corner maps to
    exactly 1.  Returned arrays are cached and write-protected.
    """
    h, w = int(h), int(w)
    if h < 2 or w < 2:
        raise InvalidInputError(f"field must be at least 2x2, got {h}x{w}")
    return _radial_field_cached(h, w)


def soft_weight(r, cfg: FreqRegConfig):
    """Exponential ramp from w(0) = 1 to w(1) = 1 + lam."""
    if not isinstance(cfg, FreqRegConfig):
        raise InvalidInputError(f"cfg must be a FreqRegConfig, got {type(cfg).__name__}")
    a = np.asarray(r, dtype=np.float64)
    if not np.isfinite(a).all():
        raise InvalidInputError("r contains non-finite values")
    if a.size and (a.min() < 0.0 or a.max() > 1.0):
        raise InvalidInputError("r must lie in [0, 1]")
    # expm1 keeps w(1) = 1 + lam exact: the numerator and denominator
    # are then the same float when r == 1.
    w = 1.0 + cfg.lam * (np.expm1(cfg.gamma * a) / np.expm1(cfg.gamma))
    if np.ndim(r) == 0:
        return float(w)
    return w


@lru_cache(maxsize=64)
def _weight_field_cached(h: int, w: int, cfg: FreqRegConfig) -> np.ndarray:
    out = soft_weight(_radial_field_cached(h, w), cfg)
    out.setflags(write=False)
    return out


def weight_field(h: int, w: int, cfg: FreqRegConfig) -> np.ndarray:
    """soft_weight evaluated on the radial field of an h x w spectrum.

    Cached and write-protected; FreqRegConfig is frozen, so it is a
    safe cache key.
    """
    if not isinstance(cfg, FreqRegConfig):
        raise InvalidInputError(f"cfg must be a FreqRegConfig, got {type(cfg).__name__}")
    h, w = int(h), int(w)
    if h < 2 or w < 2:
        raise InvalidInputError(f"field must be at least 2x2, got {h}x{w}")
    return _weight_field_cached(h, w, cfg)


def freq_loss(x, y, cfg: FreqRegConfig) -> float:
    """Weighted mean squared spectral difference between two real fields."""
    ax = _as_field(x, "x")
    ay = _as_field(y, "y")
    if ax.shape != ay.shape:
        raise InvalidInputError(f"shape mismatch: {ax.shape} vs {ay.shape}")
    h, w = ax.shape
    # dft2 is linear, so transforming the difference equals the
    # difference of the transforms.
    s = dft2(ax - ay)
    wf = weight_field(h, w, cfg)
    return float(np.sum((wf * np.abs(s)) ** 2) / (h * w))


def freq_loss_grad(x, y, cfg: FreqRegConfig) -> np.ndarray:
    """Analytic gradient of freq_loss with respect to x."""
    ax = _as_field(x, "x")
    ay = _as_field(y, "y")
    if ax.shape != ay.shape:
        raise InvalidInputError(f"shape mismatch: {ax.shape} vs {ay.shape}")
    h, w = ax.shape
    s = dft2(ax - ay)
    wf = weight_field(h, w, cfg)
    return idft2(wf * wf * s) * (2.0 / (h * w))


@lru_cache(maxsize=128)
def _band_masks(h: int, w: int, e: tuple[float, ...]) -> tuple[np.ndarray, ...]:
    r = _radial_field_cached(h, w)
    masks = []
    for k in range(len(e) - 1):
        if k == len(e) - 2:
            mask = (r >= e[k]) & (r <= e[k + 1])
        else:
            mask = (r >= e[k]) & (r < e[k + 1])
        mask.setflags(write=False)
        masks.append(mask)
    return tuple(masks)


def band_energies(spectrum, edges) -> np.ndarray:
    """Sum |spectrum|^2 per radial band.

    Band k collects bins with edges[k] <= r < edges[k+1]; the last band
    also includes r == edges[-1].
    """
    a = np.asarray(spectrum)
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise InvalidInputError(f"spectrum must be 2-D and at least 2x2, got shape {a.shape}")
    e = tuple(float(v) for v in edges)
    if len(e) < 2 or any(p >= q for p, q in zip(e, e[1:])):
        raise InvalidInputError(f"edges must be strictly ascending, got {edges!r}")
    masks = _band_masks(a.shape[0], a.shape[1], e)
    power = np.abs(a) ** 2
    out = np.empty(len(e) - 1, dtype=np.float64)
    for k, mask in enumerate(masks):
        out[k] = float(power[mask].sum())
    return out
