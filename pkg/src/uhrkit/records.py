"""Image records and the JSON-lines manifest format.

One record per line, UTF-8, keys always in the same order, floats
printed with 9 significant digits.  That makes manifests byte-stable
across runs and worker counts.  Reading a manifest back and rewriting
it reproduces the file byte for byte; floats that carry more than 9
significant digits are canonicalized on the first write.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidInputError, ParseError
from .metrics import GlcmFeatures, MetricVector

__all__ = [
    "ImageRecord",
    "MANIFEST_KEYS",
    "canonical_float",
    "record_to_line",
    "write_manifest",
    "read_manifest",
]

MANIFEST_KEYS = (
    "path",
    "width",
    "height",
    "laplacian_var",
    "sobel_edge_density",
    "glcm_contrast",
    "glcm_entropy",
    "glcm_correlation",
    "glcm_degenerate",
    "glcm_aggregate",
    "shannon_entropy",
    "aesthetic",
    "caption",
    "caption_len",
    "passed_filter",
    "top_texture",
    "top_entropy",
    "top_aesthetic",
    "selected",
)

_METRIC_KEYS = (
    "laplacian_var",
    "sobel_edge_density",
    "glcm_contrast",
    "glcm_entropy",
    "glcm_correlation",
    "glcm_degenerate",
    "glcm_aggregate",
    "shannon_entropy",
)


@dataclass
class ImageRecord:
    """One corpus image: identity, metrics and selection flags."""

    path: str
    width: int
    height: int
    metrics: MetricVector | None = None
    caption: str | None = None
    caption_len: int | None = None
    passed_filter: bool = False
    top_texture: bool = False
    top_entropy: bool = False
    top_aesthetic: bool = False
    selected: bool = False

    @property
    def avg_resolution(self) -> float:
        return (self.width + self.height) / 2.0

    def validate(self) -> None:
        if not self.path:
            raise InvalidInputError("record path must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError(f"{self.path}: width and height must be positive")
        tops = self.top_texture and self.top_entropy and self.top_aesthetic
        if self.selected and not tops:
            raise InvalidInputError(f"{self.path}: selected requires all three top flags")
        if (self.top_texture or self.top_entropy or self.top_aesthetic) and not self.passed_filter:
            raise InvalidInputError(f"{self.path}: top flags require passed_filter")
        if (self.caption is None) != (self.caption_len is None):
            raise InvalidInputError(f"{self.path}: caption and caption_len must be set together")


def canonical_float(v: float) -> str:
    """9-significant-digit decimal form used in manifests."""
    v = float(v)
    if not math.isfinite(v):
        raise InvalidInputError(f"non-finite float {v!r} cannot be serialized")
    return format(v, ".9g")


def _fmt(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return canonical_float(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=True)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise InvalidInputError(f"cannot serialize value of type {type(v).__name__}")


def _record_fields(rec: ImageRecord) -> list[tuple[str, object]]:
    m = rec.metrics
    if m is None:
        metric_vals = {k: None for k in _METRIC_KEYS}
        aesthetic = None
    else:
        metric_vals = {
            "laplacian_var": float(m.laplacian_var),
            "sobel_edge_density": float(m.sobel_edge_density),
            "glcm_contrast": [float(f.contrast) for f in m.glcm_directions],
            "glcm_entropy": [float(f.entropy) for f in m.glcm_directions],
            "glcm_correlation": [float(f.correlation) for f in m.glcm_directions],
            "glcm_degenerate": [bool(f.degenerate) for f in m.glcm_directions],
            "glcm_aggregate": float(m.glcm_aggregate),
            "shannon_entropy": float(m.shannon_entropy),
        }
        aesthetic = None if m.aesthetic is None else float(m.aesthetic)
    return [
        ("path", rec.path),
        ("width", int(rec.width)),
        ("height", int(rec.height)),
        ("laplacian_var", metric_vals["laplacian_var"]),
        ("sobel_edge_density", metric_vals["sobel_edge_density"]),
        ("glcm_contrast", metric_vals["glcm_contrast"]),
        ("glcm_entropy", metric_vals["glcm_entropy"]),
        ("glcm_correlation", metric_vals["glcm_correlation"]),
        ("glcm_degenerate", metric_vals["glcm_degenerate"]),
        ("glcm_aggregate", metric_vals["glcm_aggregate"]),
        ("shannon_entropy", metric_vals["shannon_entropy"]),
        ("aesthetic", aesthetic),
        ("caption", rec.caption),
        ("caption_len", None if rec.caption_len is None else int(rec.caption_len)),
        ("passed_filter", rec.passed_filter),
        ("top_texture", rec.top_texture),
        ("top_entropy", rec.top_entropy),
        ("top_aesthetic", rec.top_aesthetic),
        ("selected", rec.selected),
    ]


def record_to_line(rec: ImageRecord) -> str:
    rec.validate()
    parts = (f"{json.dumps(k)}: {_fmt(v)}" for k, v in _record_fields(rec))
    return "{" + ", ".join(parts) + "}"


def write_manifest(records, path: str | Path) -> None:
    """Write records as JSON lines, atomically (temp file then rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(record_to_line(rec))
            fh.write("\n")
    os.replace(tmp, path)


def _parse_float(v, key: str, ln: int) -> float | None:
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"field {key!r} must be a number or null", ln)
    return float(v)


def _parse_float4(v, key: str, ln: int) -> list[float] | None:
    if v is None:
        return None
    if not isinstance(v, list) or len(v) != 4:
        raise ParseError(f"field {key!r} must be a 4-element array or null", ln)
    return [_parse_float(x, key, ln) for x in v]


def _parse_bool(v, key: str, ln: int) -> bool:
    if not isinstance(v, bool):
        raise ParseError(f"field {key!r} must be a boolean", ln)
    return v


def _record_from_obj(obj: dict, ln: int) -> ImageRecord:
    if not isinstance(obj.get("path"), str) or not obj["path"]:
        raise ParseError("field 'path' must be a non-empty string", ln)
    for key in ("width", "height"):
        if isinstance(obj.get(key), bool) or not isinstance(obj.get(key), int):
            raise ParseError(f"field {key!r} must be an integer", ln)

    metric_present = [obj[k] is not None for k in _METRIC_KEYS]
    if any(metric_present) != all(metric_present):
        raise ParseError("metric fields must be all present or all null", ln)

    metrics = None
    if all(metric_present):
        contrast = _parse_float4(obj["glcm_contrast"], "glcm_contrast", ln)
        entropy = _parse_float4(obj["glcm_entropy"], "glcm_entropy", ln)
        correlation = _parse_float4(obj["glcm_correlation"], "glcm_correlation", ln)
        degenerate = obj["glcm_degenerate"]
        if not isinstance(degenerate, list) or len(degenerate) != 4 or not all(isinstance(b, bool) for b in degenerate):
            raise ParseError("field 'glcm_degenerate' must be a 4-element boolean array", ln)
        dirs = tuple(
            GlcmFeatures(contrast[i], entropy[i], correlation[i], degenerate[i]) for i in range(4)
        )
        metrics = MetricVector(
            laplacian_var=_parse_float(obj["laplacian_var"], "laplacian_var", ln),
            sobel_edge_density=_parse_float(obj["sobel_edge_density"], "sobel_edge_density", ln),
            glcm_directions=dirs,
            glcm_aggregate=_parse_float(obj["glcm_aggregate"], "glcm_aggregate", ln),
            shannon_entropy=_parse_float(obj["shannon_entropy"], "shannon_entropy", ln),
            aesthetic=_parse_float(obj["aesthetic"], "aesthetic", ln),
        )
    elif obj["aesthetic"] is not None:
        raise ParseError("aesthetic score requires the other metric fields", ln)

    caption = obj["caption"]
    if caption is not None and not isinstance(caption, str):
        raise ParseError("field 'caption' must be a string or null", ln)
    caption_len = obj["caption_len"]
    if caption_len is not None and (isinstance(caption_len, bool) or not isinstance(caption_len, int)):
        raise ParseError("field 'caption_len' must be an integer or null", ln)

    rec = ImageRecord(
        path=obj["path"],
        width=obj["width"],
        height=obj["height"],
        metrics=metrics,
        caption=caption,
        caption_len=caption_len,
        passed_filter=_parse_bool(obj["passed_filter"], "passed_filter", ln),
        top_texture=_parse_bool(obj["top_texture"], "top_texture", ln),
        top_entropy=_parse_bool(obj["top_entropy"], "top_entropy", ln),
        top_aesthetic=_parse_bool(obj["top_aesthetic"], "top_aesthetic", ln),
        selected=_parse_bool(obj["selected"], "selected", ln),
    )
    try:
        rec.validate()
    except InvalidInputError as exc:
        raise ParseError(str(exc), ln) from exc
    return rec


def read_manifest(path: str | Path) -> list[ImageRecord]:
    """Parse a JSON-lines manifest; malformed lines raise ParseError with the line number."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                raise ParseError("blank line in manifest", ln)
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", ln) from exc
            if not isinstance(obj, dict):
                raise ParseError("each line must be a JSON object", ln)
            missing = [k for k in MANIFEST_KEYS if k not in obj]
            extra = [k for k in obj if k not in MANIFEST_KEYS]
            if missing or extra:
                raise ParseError(f"bad keys (missing {missing}, unexpected {extra})", ln)
            records.append(_record_from_obj(obj, ln))
    return records
