"""Shared fixtures: synthetic image corpora written to temp dirs."""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image


def write_png(path, arr) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(path)


def noise_rgb(rng, h, w, lo=0, hi=256):
    return rng.integers(lo, hi, size=(h, w, 3))


def ramp_rgb(h, w, scale=1.0):
    return np.tile(np.linspace(0.0, 255.0 * scale, w)[None, :, None], (h, 1, 3))


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Six decodable images plus decoys, with caption sidecars."""
    root = tmp_path_factory.mktemp("tiny")
    corpus = root / "images"
    caps = root / "captions"
    rng = np.random.default_rng(1234)
    write_png(corpus / "noisy.png", noise_rgb(rng, 48, 64))
    write_png(corpus / "dim.png", noise_rgb(rng, 48, 64, 100, 156))
    write_png(corpus / "ramp.png", ramp_rgb(40, 56))
    write_png(corpus / "flat.png", np.full((40, 40, 3), 200))
    write_png(corpus / "sub" / "deep.png", noise_rgb(rng, 64, 48))
    write_png(corpus / "small.png", noise_rgb(rng, 12, 12))
    (corpus / "notes.txt").write_text("not an image", encoding="utf-8")
    (corpus / "broken.png").write_bytes(b"PNG? definitely not")
    caps.mkdir()
    (caps / "sub").mkdir()
    (caps / "noisy.txt").write_text("speckled full range noise", encoding="utf-8")
    (caps / "sub" / "deep.txt").write_text("nested  directory   caption", encoding="utf-8")
    return {"root": root, "corpus": corpus, "captions": caps,
            "paths": ["dim.png", "flat.png", "noisy.png", "ramp.png", "small.png", "sub/deep.png"]}


# Thresholds sized for the synthetic corpora below (64x64 images).
CORPUS_THRESHOLDS = {
    "min_avg_resolution": 32.0,
    "laplacian_min": 100.0,
    "sobel_density_min": 0.05,
    "sobel_grad_threshold": 50.0,
}


@pytest.fixture(scope="session")
def corpus64(tmp_path_factory):
    """64 images with controlled metric structure.

    24 duplicates (6 templates x 4 copies) force exact metric ties, 24
    distinct images pass the preliminary thresholds, 8 ramps fail the
    sharpness gates, 4 flats fail everything, 4 tiny images fail the
    resolution gate.
    """
    root = tmp_path_factory.mktemp("corpus64")
    rng = np.random.default_rng(99)
    count = 0
    for k in range(6):
        lo = 8 * k
        template = noise_rgb(rng, 64, 64, lo, 256 - lo)
        for i in range(4):
            write_png(root / "dup" / f"t{k}_{i}.png", template)
            count += 1
    for k in range(16):
        amp = int(rng.integers(40, 128))
        base = int(rng.integers(0, 256 - amp))
        write_png(root / "noise" / f"n{k:02d}.png", noise_rgb(rng, 64, 64, base, base + amp))
        count += 1
    for k in range(8):
        mixed = 0.5 * noise_rgb(rng, 64, 64) + 0.5 * ramp_rgb(64, 64)
        write_png(root / "mix" / f"m{k}.png", mixed)
        count += 1
    for k in range(8):
        write_png(root / "soft" / f"r{k}.png", ramp_rgb(64, 64, scale=0.5 + 0.05 * k))
        count += 1
    for k in range(4):
        write_png(root / "flat" / f"f{k}.png", np.full((64, 64, 3), 20 + 60 * k))
        count += 1
    for k in range(4):
        write_png(root / "tiny" / f"s{k}.png", noise_rgb(rng, 16, 16))
        count += 1
    assert count == 64
    return root


@pytest.fixture(scope="session")
def corpus50(tmp_path_factory):
    """50 noise images in mixed sizes for the parallel-determinism check."""
    root = tmp_path_factory.mktemp("corpus50")
    rng = np.random.default_rng(31337)
    shapes = [(64, 64)] * 30 + [(72, 96)] * 10 + [(90, 120)] * 10
    for i, (h, w) in enumerate(shapes):
        write_png(root / f"g{i // 10}" / f"img{i:02d}.png", noise_rgb(rng, h, w))
    return root
