"""Aesthetic score acquisition.

Three interchangeable sources:

* score-file: JSON-lines of {"path": ..., "score": ...} produced
  offline by whatever model the user prefers.
* subprocess: a long-lived child process speaking line-delimited JSON.
  We write {"path": p} to its stdin, it answers {"path": p,
  "score": s} on stdout, one line per request, and exits cleanly when
  stdin closes.  A record is given up after two retries; a child that
  dies is restarted once and a second death raises
  ScorerUnavailableError.
* heuristic: a crude built-in colorfulness/contrast composite.  It is
  a plumbing stand-in so the pipeline runs end to end offline, not a
  substitute for a learned aesthetic model.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import shlex
import subprocess
import threading
from pathlib import Path

import numpy as np
from PIL import Image

from .config import ScorerSpec
from .errors import InvalidInputError, ParseError, ScorerUnavailableError
from .records import ImageRecord

__all__ = [
    "load_score_file",
    "heuristic_aesthetic",
    "SubprocessScorer",
    "apply_aesthetic_scores",
]

log = logging.getLogger(__name__)


def load_score_file(path: str | Path) -> dict[str, float]:
    """Parse a JSON-lines score file into a path -> score map.

    Lines must be objects with a string "path" and numeric "score";
    other keys are ignored so files from third-party tools work as-is.
    Duplicate paths keep the last value.
    """
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", ln) from exc
            if not isinstance(obj, dict) or not isinstance(obj.get("path"), str):
                raise ParseError("expected an object with a string 'path'", ln)
            score = obj.get("score")
            if isinstance(score, bool) or not isinstance(score, (int, float)):
                raise ParseError("expected a numeric 'score'", ln)
            scores[obj["path"]] = float(score)
    return scores


def heuristic_aesthetic(rgb) -> float:
    """Colorfulness plus RMS luminance contrast, roughly on a 0..10 scale.

    Colorfulness follows the familiar opponent-axis statistic (std and
    mean magnitude of R-G and 0.5(R+G)-B).  Only a rough proxy: it
    rewards chroma spread and global contrast, nothing else.
    """
    a = np.asarray(rgb, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3:
        raise InvalidInputError(f"expected an H x W x 3 array, got shape {a.shape}")
    r, g, b = a[:, :, 0], a[:, :, 1], a[:, :, 2]
    rg = r - g
    yb = 0.5 * (r + g) - b
    colorfulness = math.hypot(float(rg.std()), float(yb.std())) + 0.3 * math.hypot(
        float(rg.mean()), float(yb.mean())
    )
    luma = 0.299 * r + 0.587 * g + 0.114 * b
    contrast = float(luma.std())
    return colorfulness / 25.0 + contrast / 16.0


class SubprocessScorer:
    """Client for the line-delimited JSON scorer protocol.

    Requests are serialized: one outstanding path at a time, with a
    per-response timeout.  Use as a context manager so the child is
    always reaped.
    """

    def __init__(self, command: str, timeout_s: float = 30.0,
                 max_attempts: int = 3, max_restarts: int = 1):
        self._argv = shlex.split(command)
        if not self._argv:
            raise InvalidInputError("scorer command must be non-empty")
        self.timeout_s = float(timeout_s)
        self.max_attempts = int(max_attempts)
        self.max_restarts = int(max_restarts)
        self._restarts = 0
        self._proc: subprocess.Popen | None = None
        self._queue: queue.Queue | None = None

    def __enter__(self) -> "SubprocessScorer":
        self._start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _start(self) -> None:
        try:
            self._proc = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ScorerUnavailableError(f"cannot start scorer {self._argv}: {exc}") from exc
        self._queue = queue.Queue()

        def _drain(stream, q):
            for line in stream:
                q.put(line)
            q.put(None)  # EOF marker

        threading.Thread(target=_drain, args=(self._proc.stdout, self._queue), daemon=True).start()

    def _restart_or_raise(self) -> None:
        self._restarts += 1
        self._reap()
        if self._restarts > self.max_restarts:
            raise ScorerUnavailableError(
                f"scorer {self._argv} failed after {self._restarts - 1} restart(s)"
            )
        log.warning("scorer process died; restarting (%d/%d)", self._restarts, self.max_restarts)
        self._start()

    def _reap(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._proc = None

    def close(self) -> None:
        self._reap()

    def score(self, path: str) -> float | None:
        """Score one path; None after the retry budget is exhausted."""
        if self._proc is None:
            self._start()
        for _ in range(self.max_attempts):
            if self._proc is None or self._proc.poll() is not None:
                self._restart_or_raise()
            try:
                self._proc.stdin.write(json.dumps({"path": path}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                self._restart_or_raise()
                continue
            try:
                line = self._queue.get(timeout=self.timeout_s)
            except queue.Empty:
                log.warning("scorer timed out after %.1fs for %s", self.timeout_s, path)
                continue
            if line is None:
                # stdout closed: the child is gone.
                self._restart_or_raise()
                continue
            try:
                obj = json.loads(line)
                got_path = obj["path"]
                score = float(obj["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                log.warning("scorer sent a malformed response for %s: %r", path, line.strip())
                continue
            if got_path != path:
                log.warning("scorer answered for %r while %r was pending", got_path, path)
                continue
            return score
        return None


def _load_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64)


def apply_aesthetic_scores(records: list[ImageRecord], spec: ScorerSpec,
                           root: str | Path | None = None) -> list[str]:
    """Fill metrics.aesthetic on each record; returns the unscored paths.

    Records that cannot be scored keep aesthetic = None and are later
    excluded from the aesthetic ranking; each one is logged.
    """
    if not isinstance(spec, ScorerSpec):
        raise InvalidInputError(f"spec must be a ScorerSpec, got {type(spec).__name__}")
    unscored: list[str] = []

    def assign(rec: ImageRecord, value: float | None) -> None:
        if value is None or rec.metrics is None:
            unscored.append(rec.path)
            log.warning("no aesthetic score for %s; it will be excluded from the aesthetic ranking", rec.path)
        else:
            rec.metrics.aesthetic = float(value)

    if spec.kind == "score-file":
        scores = load_score_file(spec.location)
        for rec in records:
            assign(rec, scores.get(rec.path))
    elif spec.kind == "heuristic":
        if root is None:
            raise InvalidInputError("the heuristic scorer needs the corpus root to reload pixels")
        rootp = Path(root)
        for rec in records:
            try:
                value = heuristic_aesthetic(_load_rgb(rootp / rec.path))
            except Exception as exc:  # noqa: BLE001 - any decode failure means unscored
                log.warning("heuristic scorer failed for %s: %s", rec.path, exc)
                value = None
            assign(rec, value)
    else:  # subprocess
        with SubprocessScorer(spec.location, timeout_s=spec.timeout_s) as scorer:
            for rec in records:
                assign(rec, scorer.score(rec.path))
    return unscored
