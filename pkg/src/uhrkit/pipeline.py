"""Corpus curation pipeline: scan, measure, filter, rank, intersect.

The flow mirrors the staged recipe the metrics were designed for: a
preliminary quality filter keeps sharp, edge-rich, high-resolution
images; three independent rankings (texture richness, entropy,
aesthetic score) each keep their top fraction of the filtered pool;
the final selection is the intersection of the three.

Metric computation is the only expensive stage.  It fans out over a
process pool, and results are re-sorted by path before anything is
written, so the output manifest is byte-identical for any worker
count.
"""

from __future__ import annotations

import logging
import math
import multiprocessing
from pathlib import Path, PurePosixPath

import numpy as np
from PIL import Image

from .config import ScorerSpec, SelectionConfig
from .errors import InvalidInputError
from .metrics import compute_metrics, to_grayscale
from .records import ImageRecord, write_manifest
from .scoring import apply_aesthetic_scores

__all__ = [
    "IMAGE_EXTENSIONS",
    "scan_corpus",
    "load_gray",
    "compute_all_metrics",
    "preliminary_filter",
    "percentile_select",
    "intersect",
    "merge_captions",
    "run_selection",
    "stats_report",
    "format_stats_text",
]

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".webp", ".bmp", ".tif", ".tiff"}


def scan_corpus(root: str | Path) -> list[ImageRecord]:
    """One stub record per decodable image under root, sorted by path.

    Paths are stored relative to root with forward slashes.  Files with
    a non-image extension are skipped quietly (caption sidecars live in
    the same tree in some layouts); files that look like images but do
    not decode are excluded with a logged reason.
    """
    rootp = Path(root)
    if not rootp.exists():
        raise FileNotFoundError(f"corpus root {rootp} does not exist")
    if not rootp.is_dir():
        raise NotADirectoryError(f"corpus root {rootp} is not a directory")
    records = []
    for p in sorted(rootp.rglob("*")):
        if not p.is_file() or p.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        rel = p.relative_to(rootp).as_posix()
        try:
            with Image.open(p) as im:
                width, height = im.size
                im.verify()
        except Exception as exc:  # noqa: BLE001 - decoders raise a zoo of types
            log.warning("excluding %s: %s: %s", rel, type(exc).__name__, exc)
            continue
        records.append(ImageRecord(path=rel, width=width, height=height))
    records.sort(key=lambda r: r.path)
    return records


def load_gray(path: str | Path) -> np.ndarray:
    """Decode an image file to a float64 BT.601 luminance array."""
    with Image.open(path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    return to_grayscale(rgb)


def _metric_task(task):
    root, rel, cfg = task
    try:
        gray = load_gray(Path(root) / rel)
        return rel, None, compute_metrics(gray, cfg)
    except Exception as exc:  # noqa: BLE001 - failures are reported, not fatal
        return rel, f"{type(exc).__name__}: {exc}", None


def compute_all_metrics(records: list[ImageRecord], root: str | Path, cfg: SelectionConfig,
                        workers: int = 1, checkpoint_path: str | Path | None = None,
                        checkpoint_every: int = 64) -> list[ImageRecord]:
    """Fill in metrics for every record that lacks them.

    Records that already carry metrics are skipped, which is what makes
    an interrupted run resumable from its manifest.  Files that fail to
    decode at this stage are dropped with a logged reason.  When
    checkpoint_path is given the partial manifest is rewritten
    atomically every checkpoint_every completions.
    """
    if workers < 1:
        raise InvalidInputError(f"workers must be >= 1, got {workers!r}")
    by_path = {r.path: r for r in records}
    todo = [r.path for r in records if r.metrics is None]
    tasks = [(str(root), rel, cfg) for rel in todo]
    failed: set[str] = set()
    done = 0

    def finish(rel, err, metrics):
        nonlocal done
        if err is not None:
            log.warning("dropping %s: %s", rel, err)
            failed.add(rel)
        else:
            by_path[rel].metrics = metrics
        done += 1
        if checkpoint_path is not None and done % checkpoint_every == 0:
            keep = sorted((r for r in records if r.path not in failed), key=lambda r: r.path)
            write_manifest(keep, checkpoint_path)

    if workers == 1 or len(tasks) <= 1:
        for task in tasks:
            finish(*_metric_task(task))
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            # Completion order is nondeterministic; per-path results are
            # not, and the final sort restores a canonical order.
            for rel, err, metrics in pool.imap_unordered(_metric_task, tasks, chunksize=1):
                finish(rel, err, metrics)

    out = [r for r in records if r.path not in failed]
    out.sort(key=lambda r: r.path)
    return out


def preliminary_filter(records: list[ImageRecord], cfg: SelectionConfig) -> list[ImageRecord]:
    """Absolute-threshold quality gate; sets passed_filter on each record.

    A record passes when its average resolution, Laplacian variance and
    Sobel edge density all clear the configured minimums.  Records
    without metrics never pass.  Downstream flags are reset so the
    filter can be re-run idempotently.
    """
    for r in records:
        m = r.metrics
        r.passed_filter = bool(
            m is not None
            and r.avg_resolution >= cfg.min_avg_resolution
            and m.laplacian_var >= cfg.laplacian_min
            and m.sobel_edge_density >= cfg.sobel_density_min
        )
        r.top_texture = r.top_entropy = r.top_aesthetic = r.selected = False
    return records


_RANK_KEYS = {
    "glcm_aggregate": lambda m: m.glcm_aggregate,
    "shannon_entropy": lambda m: m.shannon_entropy,
    "aesthetic": lambda m: m.aesthetic,
}


def percentile_select(records: list[ImageRecord], key: str, fraction: float,
                      flag: str, skip_missing: bool = False) -> list[ImageRecord]:
    """Mark the top ceil(fraction * n) filtered records on one metric.

    Ranking is by metric descending with ties broken by ascending path,
    so selection is total-order deterministic.  With skip_missing the
    records lacking the metric simply drop out of the ranking (used for
    unscored aesthetic records); otherwise a missing value is an error.
    """
    if not (0.0 < fraction <= 1.0):
        raise InvalidInputError(f"fraction must be in (0, 1], got {fraction!r}")
    getter = _RANK_KEYS.get(key)
    if getter is None:
        raise InvalidInputError(f"unknown ranking key {key!r}; expected one of {sorted(_RANK_KEYS)}")
    if flag not in ("top_texture", "top_entropy", "top_aesthetic"):
        raise InvalidInputError(f"unknown flag {flag!r}")
    ranked = []
    for r in records:
        setattr(r, flag, False)
        if not r.passed_filter:
            continue
        value = getter(r.metrics) if r.metrics is not None else None
        if value is None:
            if skip_missing:
                continue
            raise InvalidInputError(f"record {r.path} lacks metric {key!r}")
        ranked.append((float(value), r))
    k = math.ceil(fraction * len(ranked))
    ranked.sort(key=lambda vr: (-vr[0], vr[1].path))
    for _, r in ranked[:k]:
        setattr(r, flag, True)
    return records


def intersect(records: list[ImageRecord]) -> list[ImageRecord]:
    """selected = top_texture AND top_entropy AND top_aesthetic."""
    for r in records:
        r.selected = r.top_texture and r.top_entropy and r.top_aesthetic
    return records


def merge_captions(records: list[ImageRecord], caption_dir: str | Path) -> list[ImageRecord]:
    """Attach sidecar captions: <caption_dir>/<image path with .txt suffix>.

    Sub-directories mirror the corpus layout.  A missing sidecar leaves
    the record without a caption; caption_len is the whitespace word
    count.
    """
    d = Path(caption_dir)
    if not d.is_dir():
        raise NotADirectoryError(f"caption directory {d} does not exist")
    for r in records:
        sidecar = d / PurePosixPath(r.path).with_suffix(".txt")
        if sidecar.is_file():
            text = sidecar.read_text(encoding="utf-8")
            r.caption = text
            r.caption_len = len(text.split())
        else:
            r.caption = None
            r.caption_len = None
    return records


def run_selection(records: list[ImageRecord], cfg: SelectionConfig, scorer: ScorerSpec,
                  root: str | Path | None = None) -> list[ImageRecord]:
    """Filter, rank on all three axes, score aesthetics, intersect."""
    preliminary_filter(records, cfg)
    percentile_select(records, "glcm_aggregate", cfg.top_fraction, "top_texture")
    percentile_select(records, "shannon_entropy", cfg.top_fraction, "top_entropy")
    apply_aesthetic_scores(records, scorer, root)
    percentile_select(records, "aesthetic", cfg.top_fraction, "top_aesthetic", skip_missing=True)
    intersect(records)
    return records


def _histogram(values, bins: int = 10) -> dict:
    vals = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if vals.size == 0:
        return {"count": 0, "min": None, "max": None, "mean": None, "edges": [], "counts": []}
    counts, edges = np.histogram(vals, bins=bins)
    return {
        "count": int(vals.size),
        "min": float(vals.min()),
        "max": float(vals.max()),
        "mean": float(vals.mean()),
        "edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
    }


def stats_report(records: list[ImageRecord], bins: int = 10) -> dict:
    """Counts plus histograms of resolutions, caption lengths and metrics."""
    counts = {
        "records": len(records),
        "with_metrics": sum(r.metrics is not None for r in records),
        "with_caption": sum(r.caption is not None for r in records),
        "scored": sum(r.metrics is not None and r.metrics.aesthetic is not None for r in records),
        "passed_filter": sum(r.passed_filter for r in records),
        "top_texture": sum(r.top_texture for r in records),
        "top_entropy": sum(r.top_entropy for r in records),
        "top_aesthetic": sum(r.top_aesthetic for r in records),
        "selected": sum(r.selected for r in records),
    }
    m = lambda r, k: getattr(r.metrics, k) if r.metrics is not None else None  # noqa: E731
    histograms = {
        "avg_resolution": _histogram((r.avg_resolution for r in records), bins),
        "width": _histogram((r.width for r in records), bins),
        "height": _histogram((r.height for r in records), bins),
        "caption_len": _histogram((r.caption_len for r in records), bins),
        "laplacian_var": _histogram((m(r, "laplacian_var") for r in records), bins),
        "sobel_edge_density": _histogram((m(r, "sobel_edge_density") for r in records), bins),
        "glcm_aggregate": _histogram((m(r, "glcm_aggregate") for r in records), bins),
        "shannon_entropy": _histogram((m(r, "shannon_entropy") for r in records), bins),
        "aesthetic": _histogram((m(r, "aesthetic") for r in records), bins),
    }
    return {"counts": counts, "histograms": histograms}


def format_stats_text(report: dict) -> str:
    """Human-readable rendering of a stats_report dict."""
    lines = ["counts:"]
    for k, v in report["counts"].items():
        lines.append(f"  {k:<16} {v}")
    lines.append("")
    lines.append(f"{'quantity':<20} {'n':>6} {'min':>12} {'mean':>12} {'max':>12}")
    lines.append("-" * 66)
    for name, h in report["histograms"].items():
        if h["count"] == 0:
            lines.append(f"{name:<20} {0:>6} {'-':>12} {'-':>12} {'-':>12}")
        else:
            lines.append(
                f"{name:<20} {h['count']:>6} {h['min']:>12.4g} {h['mean']:>12.4g} {h['max']:>12.4g}"
            )
    return "\n".join(lines)
