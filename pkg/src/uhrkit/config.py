"""Configuration dataclasses and strict JSON loading.

Every knob has a default; JSON config files and CLI flags override them.
Unknown keys are rejected at every nesting level so typos fail loudly
instead of silently running with defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError, InvalidInputError

SCORER_KINDS = ("score-file", "subprocess", "heuristic")


def _is_real(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


@dataclass(frozen=True)
class SelectionConfig:
    """Thresholds and knobs for the curation pipeline.

    ``top_fraction`` and ``min_avg_resolution`` follow the published
    recipe (top half of the ranking, average of width and height at
    least 3000 px).  The three preliminary-filter thresholds
    (``laplacian_min``, ``sobel_density_min``, ``sobel_grad_threshold``)
    are invented defaults, exposed here precisely because they are
    judgement calls; tune them per corpus.
    """

    laplacian_min: float = 100.0
    sobel_density_min: float = 0.05
    sobel_grad_threshold: float = 50.0
    top_fraction: float = 0.5
    min_avg_resolution: float = 3000.0
    metric_long_side: int = 1024
    glcm_levels: int = 32
    glcm_distance: int = 1

    def __post_init__(self):
        if not (_is_real(self.top_fraction) and 0.0 < self.top_fraction <= 1.0):
            raise InvalidInputError(f"top_fraction must be in (0, 1], got {self.top_fraction!r}")
        for name in ("laplacian_min", "sobel_density_min", "sobel_grad_threshold", "min_avg_resolution"):
            v = getattr(self, name)
            if not (_is_real(v) and v >= 0.0):
                raise InvalidInputError(f"{name} must be a non-negative number, got {v!r}")
        if not (_is_int(self.metric_long_side) and self.metric_long_side >= 1):
            raise InvalidInputError(f"metric_long_side must be a positive integer, got {self.metric_long_side!r}")
        if not (_is_int(self.glcm_levels) and 2 <= self.glcm_levels <= 256):
            raise InvalidInputError(f"glcm_levels must be an integer in [2, 256], got {self.glcm_levels!r}")
        if not (_is_int(self.glcm_distance) and self.glcm_distance >= 1):
            raise InvalidInputError(f"glcm_distance must be a positive integer, got {self.glcm_distance!r}")


@dataclass(frozen=True)
class ScorerSpec:
    """Which aesthetic scorer to use.

    kind is one of ``score-file`` (JSON-lines path/score map),
    ``subprocess`` (line-delimited JSON child process) or ``heuristic``
    (built-in colorfulness/contrast stand-in).
    """

    kind: str = "heuristic"
    location: str | None = None
    timeout_s: float = 30.0

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise InvalidInputError(f"scorer kind must be one of {SCORER_KINDS}, got {self.kind!r}")
        if self.kind in ("score-file", "subprocess") and not self.location:
            raise InvalidInputError(f"scorer kind {self.kind!r} requires a location")
        if not (_is_real(self.timeout_s) and self.timeout_s > 0):
            raise InvalidInputError(f"scorer timeout_s must be positive, got {self.timeout_s!r}")


@dataclass(frozen=True)
class FreqRegConfig:
    """Soft spectral weighting: w(r) = 1 + lam * (exp(gamma*r) - 1) / (exp(gamma) - 1).

    lam (JSON key "lambda") scales the extra weight at the highest
    radial frequency; gamma controls how sharply the weight ramps up.
    Both defaults are declared choices, not published values.
    """

    lam: float = 1.0
    gamma: float = 4.0

    def __post_init__(self):
        if not (_is_real(self.lam) and self.lam >= 0.0):
            raise InvalidInputError(f"lambda must be >= 0, got {self.lam!r}")
        if not (_is_real(self.gamma) and self.gamma > 0.0):
            raise InvalidInputError(f"gamma must be > 0, got {self.gamma!r}")


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of the timestep-sampling Beta distribution."""

    alpha: float = 2.0
    beta: float = 4.0

    def __post_init__(self):
        if not (_is_real(self.alpha) and self.alpha > 0.0):
            raise InvalidInputError(f"alpha must be > 0, got {self.alpha!r}")
        if not (_is_real(self.beta) and self.beta > 0.0):
            raise InvalidInputError(f"beta must be > 0, got {self.beta!r}")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for the desk-scale velocity-prediction trainer."""

    image_size: int = 32
    steps: int = 2000
    batch_size: int = 16
    learning_rate: float = 0.01
    lambda_freq: float = 0.5
    seed: int = 0
    use_beta_timesteps: bool = True
    use_freq_loss: bool = True
    bias_bins: int = 16
    eval_size: int = 64
    eval_times: tuple[float, ...] = (0.1, 0.3, 0.5)
    band_edges: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)
    freq: FreqRegConfig = field(default_factory=FreqRegConfig)
    beta: BetaParams = field(default_factory=BetaParams)

    def __post_init__(self):
        if not (_is_int(self.image_size) and self.image_size >= 2):
            raise InvalidInputError(f"image_size must be an integer >= 2, got {self.image_size!r}")
        if not (_is_int(self.steps) and self.steps >= 0):
            raise InvalidInputError(f"steps must be a non-negative integer, got {self.steps!r}")
        if not (_is_int(self.batch_size) and self.batch_size >= 1):
            raise InvalidInputError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if not (_is_real(self.learning_rate) and self.learning_rate > 0):
            raise InvalidInputError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if not (_is_real(self.lambda_freq) and self.lambda_freq >= 0):
            raise InvalidInputError(f"lambda_freq must be >= 0, got {self.lambda_freq!r}")
        if not _is_int(self.seed):
            raise InvalidInputError(f"seed must be an integer, got {self.seed!r}")
        for name in ("bias_bins", "eval_size"):
            v = getattr(self, name)
            if not (_is_int(v) and v >= 1):
                raise InvalidInputError(f"{name} must be a positive integer, got {v!r}")
        if not self.eval_times or not all(_is_real(t) and 0.0 < t < 1.0 for t in self.eval_times):
            raise InvalidInputError(f"eval_times must be a non-empty tuple of values in (0, 1), got {self.eval_times!r}")
        e = self.band_edges
        if len(e) < 2 or e[0] != 0.0 or e[-1] != 1.0 or any(a >= b for a, b in zip(e, e[1:])):
            raise InvalidInputError(f"band_edges must ascend strictly from 0.0 to 1.0, got {e!r}")


@dataclass(frozen=True)
class RunConfig:
    """Merged view of everything a CLI run needs.

    Path fields are optional because each subcommand uses a subset.
    The resolved form is echoed as JSON next to the outputs so a run
    can be reproduced with ``--config`` alone.
    """

    command: str | None = None
    root: str | None = None
    manifest: str | None = None
    captions: str | None = None
    input: str | None = None
    out: str | None = None
    json_out: str | None = None
    workers: int = 1
    seeds: int = 10
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    scorer: ScorerSpec = field(default_factory=ScorerSpec)
    freq: FreqRegConfig = field(default_factory=FreqRegConfig)
    beta: BetaParams = field(default_factory=BetaParams)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not (_is_int(self.workers) and self.workers >= 1):
            raise InvalidInputError(f"workers must be a positive integer, got {self.workers!r}")
        if not (_is_int(self.seeds) and self.seeds >= 1):
            raise InvalidInputError(f"seeds must be a positive integer, got {self.seeds!r}")

    def resolved_train(self) -> TrainConfig:
        """TrainConfig with the shared freq/beta sections injected."""
        from dataclasses import replace

        return replace(self.train, freq=self.freq, beta=self.beta)


# ---------------------------------------------------------------------------
# strict dict -> dataclass construction

# JSON spellings that differ from the attribute name.
_KEY_ALIASES = {"lambda": "lam", "json": "json_out"}
_KEY_ALIASES_INV = {v: k for k, v in _KEY_ALIASES.items()}

_SECTION_TYPES = {
    "selection": SelectionConfig,
    "scorer": ScorerSpec,
    "freq": FreqRegConfig,
    "beta": BetaParams,
    "train": TrainConfig,
}

# train.freq / train.beta come from the shared top-level sections only.
_EXCLUDED_FIELDS = {TrainConfig: {"freq", "beta"}}

_TUPLE_FIELDS = {"eval_times", "band_edges"}


def _build_section(cls, data: Mapping[str, Any], path: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    excluded = _EXCLUDED_FIELDS.get(cls, set())
    known = {}  # JSON key -> attribute name
    for f in fields(cls):
        if f.name in excluded:
            continue
        known[_KEY_ALIASES_INV.get(f.name, f.name)] = f.name
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {unknown}")
    kwargs = {}
    for json_key, attr in known.items():
        if json_key not in data:
            continue
        v = data[json_key]
        if cls is RunConfig and attr in _SECTION_TYPES:
            v = _build_section(_SECTION_TYPES[attr], v, f"{path}.{attr}" if path else attr)
        elif attr in _TUPLE_FIELDS:
            if not isinstance(v, (list, tuple)):
                raise ConfigError(f"{path}.{json_key}: expected a list")
            v = tuple(v)
        kwargs[attr] = v
    try:
        return cls(**kwargs)
    except InvalidInputError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def run_config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    return _build_section(RunConfig, data, "")


def load_run_config(path: str | Path) -> RunConfig:
    """Load and validate a JSON config file."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return run_config_from_dict(data)


def _section_to_dict(obj) -> dict[str, Any]:
    excluded = _EXCLUDED_FIELDS.get(type(obj), set())
    out: dict[str, Any] = {}
    for f in fields(obj):
        if f.name in excluded:
            continue
        v = getattr(obj, f.name)
        key = _KEY_ALIASES_INV.get(f.name, f.name)
        if isinstance(v, tuple):
            v = list(v)
        out[key] = v
    return out


def run_config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    """Inverse of run_config_from_dict; suitable for JSON echo."""
    out: dict[str, Any] = {}
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if f.name in _SECTION_TYPES:
            out[f.name] = _section_to_dict(v)
        else:
            out[_KEY_ALIASES_INV.get(f.name, f.name)] = v
    return out


def merge_dicts(base: dict[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; override wins, sub-dicts merge key-wise."""
    merged = dict(base)
    for k, v in override.items():
        if isinstance(v, Mapping) and isinstance(merged.get(k), dict):
            merged[k] = merge_dicts(merged[k], v)
        else:
            merged[k] = v
    return merged
