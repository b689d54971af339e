"""Synthetic training textures with guaranteed high-frequency content.

Each texture is a sum of a few smooth Gaussian blobs (low frequency)
and a few sinusoidal gratings (high frequency), normalized to [-1, 1].
A rejection loop redraws the gratings until at least min_high_fraction
of the spectral energy sits above radius 0.5, so the frequency bands
the trainer is evaluated on are never empty by accident.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError, NumericalError
from .freqreg import band_energies, dft2

__all__ = ["TextureSpec", "gen_texture", "high_band_fraction"]

_MAX_REDRAWS = 200


@dataclass(frozen=True)
class TextureSpec:
    size: int = 32
    blob_count: tuple[int, int] = (2, 4)
    grating_count: tuple[int, int] = (1, 3)
    min_high_fraction: float = 0.10
    high_cutoff: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.size < 4:
            raise InvalidInputError(f"size must be >= 4, got {self.size!r}")
        for name in ("blob_count", "grating_count"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise InvalidInputError(f"{name} must be a (lo, hi) range with 1 <= lo <= hi")
        if not (0.0 <= self.min_high_fraction < 1.0):
            raise InvalidInputError(f"min_high_fraction must be in [0, 1), got {self.min_high_fraction!r}")
        if not (0.0 < self.high_cutoff < 1.0):
            raise InvalidInputError(f"high_cutoff must be in (0, 1), got {self.high_cutoff!r}")


def high_band_fraction(tex, cutoff: float = 0.5) -> float:
    """Fraction of spectral energy at radius >= cutoff."""
    s = dft2(tex)
    low, high = band_energies(s, (0.0, cutoff, 1.0))
    total = low + high
    if total == 0.0:
        return 0.0
    return float(high / total)


@lru_cache(maxsize=16)
def _grids(size: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    yy.setflags(write=False)
    xx.setflags(write=False)
    return yy, xx


def _blob_field(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    yy, xx = _grids(size)
    field = np.zeros((size, size))
    for _ in range(count):
        cy, cx = rng.uniform(0, size, size=2)
        sigma = rng.uniform(size / 8.0, size / 4.0)
        amp = rng.uniform(0.5, 1.0)
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma * sigma))
    return field


def _grating_field(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    yy, xx = _grids(size)
    field = np.zeros((size, size))
    for _ in range(count):
        # Frequency magnitude in cycles per image; at least size/4 so
        # the energy lands well away from the spectral centre.
        fmag = rng.uniform(size / 4.0, size / 2.0 - 1.0)
        theta = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 1.0)
        fx = fmag * np.cos(theta)
        fy = fmag * np.sin(theta)
        field += amp * np.cos(2.0 * np.pi * (fx * xx + fy * yy) / size + phase)
    return field


def gen_texture(spec: TextureSpec) -> np.ndarray:
    """Deterministic texture for a spec; same spec, same array."""
    rng = np.random.default_rng(spec.seed)
    n_blobs = int(rng.integers(spec.blob_count[0], spec.blob_count[1] + 1))
    low = _blob_field(rng, spec.size, n_blobs)
    for _ in range(_MAX_REDRAWS):
        n_gratings = int(rng.integers(spec.grating_count[0], spec.grating_count[1] + 1))
        tex = low + _grating_field(rng, spec.size, n_gratings)
        peak = float(np.abs(tex).max())
        if peak == 0.0:
            continue
        tex = tex / peak
        if high_band_fraction(tex, spec.high_cutoff) >= spec.min_high_fraction:
            return tex
    raise NumericalError(
        f"could not reach high-band fraction {spec.min_high_fraction} in {_MAX_REDRAWS} redraws"
    )
