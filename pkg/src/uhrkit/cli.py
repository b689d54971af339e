"""Command line front end.

Every subcommand reads its settings from (in increasing precedence)
dataclass defaults, an optional ``--config`` JSON file, and kebab-case
flags.  The fully resolved configuration is echoed as JSON next to each
output so any run can be repeated with ``--config`` alone.

Exit codes: 0 success, 1 bad flags/config, 2 runtime failure.
Progress goes to stderr; results go to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import flowtrain, freqreg, pipeline
from .config import (
    SCORER_KINDS,
    RunConfig,
    load_run_config,
    merge_dicts,
    run_config_from_dict,
    run_config_to_dict,
)
from .errors import ConfigError, InvalidInputError, UhrkitError
from .records import read_manifest, write_manifest
from .timesteps import TIME_ORIENTATION, BetaSampler

log = logging.getLogger("uhrkit")

COMMANDS = (
    "scan",
    "metrics",
    "select",
    "stats",
    "caption-merge",
    "freq-analyze",
    "dots-sample",
    "train-toy",
    "compare",
)


class _Parser(argparse.ArgumentParser):
    # Exit-code contract: bad flags are a validation error (1), not
    # argparse's default 2.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats_csv(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


# argparse dest -> (section name or None, config key)
_FLAG_MAP = {
    "root": (None, "root"),
    "manifest": (None, "manifest"),
    "captions": (None, "captions"),
    "input": (None, "input"),
    "out": (None, "out"),
    "json_out": (None, "json"),
    "workers": (None, "workers"),
    "seeds": (None, "seeds"),
    "laplacian_min": ("selection", "laplacian_min"),
    "sobel_density_min": ("selection", "sobel_density_min"),
    "sobel_grad_threshold": ("selection", "sobel_grad_threshold"),
    "top_fraction": ("selection", "top_fraction"),
    "min_avg_resolution": ("selection", "min_avg_resolution"),
    "metric_long_side": ("selection", "metric_long_side"),
    "glcm_levels": ("selection", "glcm_levels"),
    "glcm_distance": ("selection", "glcm_distance"),
    "scorer_kind": ("scorer", "kind"),
    "scorer_location": ("scorer", "location"),
    "scorer_timeout_s": ("scorer", "timeout_s"),
    "lam": ("freq", "lambda"),
    "gamma": ("freq", "gamma"),
    "alpha": ("beta", "alpha"),
    "beta": ("beta", "beta"),
    "image_size": ("train", "image_size"),
    "steps": ("train", "steps"),
    "batch_size": ("train", "batch_size"),
    "learning_rate": ("train", "learning_rate"),
    "lambda_freq": ("train", "lambda_freq"),
    "seed": ("train", "seed"),
    "use_beta_timesteps": ("train", "use_beta_timesteps"),
    "use_freq_loss": ("train", "use_freq_loss"),
    "bias_bins": ("train", "bias_bins"),
    "eval_size": ("train", "eval_size"),
    "eval_times": ("train", "eval_times"),
    "band_edges": ("train", "band_edges"),
}


def _add_selection_flags(p):
    g = p.add_argument_group("selection")
    g.add_argument("--laplacian-min", type=float)
    g.add_argument("--sobel-density-min", type=float)
    g.add_argument("--sobel-grad-threshold", type=float)
    g.add_argument("--top-fraction", type=float)
    g.add_argument("--min-avg-resolution", type=float)
    g.add_argument("--metric-long-side", type=int)
    g.add_argument("--glcm-levels", type=int)
    g.add_argument("--glcm-distance", type=int)


def _add_scorer_flags(p):
    g = p.add_argument_group("scorer")
    g.add_argument("--scorer-kind", choices=SCORER_KINDS)
    g.add_argument("--scorer-location", help="score file path or subprocess command line")
    g.add_argument("--scorer-timeout-s", type=float)


def _add_beta_flags(p):
    g = p.add_argument_group("beta")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)


def _add_train_flags(p):
    _add_beta_flags(p)
    g = p.add_argument_group("freq")
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--gamma", type=float)
    g = p.add_argument_group("train")
    g.add_argument("--image-size", type=int)
    g.add_argument("--steps", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--lambda-freq", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--use-beta-timesteps", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--use-freq-loss", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--bias-bins", type=int)
    g.add_argument("--eval-size", type=int)
    g.add_argument("--eval-times", type=_floats_csv, metavar="T1,T2,...")
    g.add_argument("--band-edges", type=_floats_csv, metavar="E0,E1,...")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uhrkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override its values")
        return p

    p = add("scan", "index decodable images under a corpus root into a manifest")
    p.add_argument("--root")
    p.add_argument("--out", help="manifest path to write")

    p = add("metrics", "compute image metrics; resumes from a partial manifest")
    p.add_argument("--root")
    p.add_argument("--manifest", help="optional partial manifest to resume from (defaults to --out if present)")
    p.add_argument("--out", help="manifest path to write")
    p.add_argument("--workers", type=int)
    _add_selection_flags(p)

    p = add("select", "filter, rank, score and intersect a measured manifest")
    p.add_argument("--root", help="corpus root (needed by the heuristic scorer)")
    p.add_argument("--manifest", help="input manifest with metrics")
    p.add_argument("--out", help="manifest path to write")
    _add_selection_flags(p)
    _add_scorer_flags(p)

    p = add("stats", "summarize a manifest (text to stdout, optional JSON)")
    p.add_argument("--manifest")
    p.add_argument("--json", dest="json_out", help="also write the report as JSON here")

    p = add("caption-merge", "attach sidecar caption files to a manifest")
    p.add_argument("--manifest")
    p.add_argument("--captions", help="caption directory mirroring the corpus layout")
    p.add_argument("--out", help="manifest path to write")

    p = add("freq-analyze", "per-radial-band spectral energy of images as JSON")
    p.add_argument("--input", help="image file or directory")
    p.add_argument("--json", dest="json_out", help="write the JSON report here instead of stdout")
    p.add_argument("--band-edges", type=_floats_csv, metavar="E0,E1,...")

    p = add("dots-sample", "draw timestep samples from the Beta distribution")
    _add_beta_flags(p)
    p.add_argument("-n", "--count", type=int, default=1000, help="number of samples")
    p.add_argument("--histogram", type=int, metavar="BINS",
                   help="emit a BINS-bin histogram over [0, 1] instead of raw samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--json", dest="json_out", help="write JSON here instead of stdout")

    p = add("train-toy", "train the toy velocity predictor and report losses")
    p.add_argument("--out", help="output directory")
    _add_train_flags(p)

    p = add("compare", "paired baseline vs treated toy-training experiment")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seeds", type=int, help="number of paired seeds")
    _add_train_flags(p)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    file_dict = {}
    if getattr(args, "config", None):
        file_dict = run_config_to_dict(load_run_config(args.config))
    flag_dict: dict = {}
    for dest, (section, key) in _FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        target = flag_dict.setdefault(section, {}) if section else flag_dict
        target[key] = value
    merged = merge_dicts(file_dict, flag_dict)
    merged["command"] = args.command
    return run_config_from_dict(merged)


def _require(cfg: RunConfig, attr: str) -> str:
    value = getattr(cfg, attr)
    if not value:
        flag = {"json_out": "json"}.get(attr, attr)
        raise ConfigError(f"{cfg.command}: --{flag.replace('_', '-')} (config key {flag!r}) is required")
    return value


def _require_dir(cfg: RunConfig, attr: str) -> str:
    value = _require(cfg, attr)
    if not Path(value).is_dir():
        raise ConfigError(f"{cfg.command}: {attr} directory {value} does not exist")
    return value


def _require_file(cfg: RunConfig, attr: str) -> str:
    value = _require(cfg, attr)
    if not Path(value).is_file():
        raise ConfigError(f"{cfg.command}: {attr} file {value} does not exist")
    return value


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _write_json(payload: dict, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n", encoding="utf-8")


def _emit_json(payload: dict, cfg: RunConfig) -> None:
    if cfg.json_out:
        _write_json(payload, cfg.json_out)
        _echo_config(cfg, Path(cfg.json_out).parent)
        log.info("%s: wrote %s", cfg.command, cfg.json_out)
    else:
        print(json.dumps(payload, indent=2, default=_jsonable))


def _echo_config(cfg: RunConfig, out_dir: str | Path) -> None:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    _write_json(run_config_to_dict(cfg), d / f"{cfg.command}.config.json")


def _write_manifest_with_echo(records, out: str | Path, cfg: RunConfig) -> None:
    outp = Path(out)
    outp.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(records, outp)
    _echo_config(cfg, outp.parent)


def _cmd_scan(cfg: RunConfig, args) -> int:
    root = _require_dir(cfg, "root")
    out = _require(cfg, "out")
    recs = pipeline.scan_corpus(root)
    _write_manifest_with_echo(recs, out, cfg)
    log.info("scan: %d record(s) -> %s", len(recs), out)
    return 0


def _cmd_metrics(cfg: RunConfig, args) -> int:
    root = _require_dir(cfg, "root")
    out = _require(cfg, "out")
    recs = pipeline.scan_corpus(root)
    if cfg.manifest:
        partial = _require_file(cfg, "manifest")
    else:
        partial = out if Path(out).is_file() else None
    if partial is not None:
        prior = {r.path: r for r in read_manifest(partial)}
        current = {r.path for r in recs}
        for gone in sorted(set(prior) - current):
            log.warning("metrics: dropping %s (no longer in corpus)", gone)
        resumed = 0
        for i, r in enumerate(recs):
            p = prior.get(r.path)
            if p is None:
                continue
            if (p.width, p.height) != (r.width, r.height):
                log.warning("metrics: %s changed size, recomputing", r.path)
                continue
            recs[i] = p
            resumed += p.metrics is not None
        log.info("metrics: resumed %d measured record(s) from %s", resumed, partial)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    recs = pipeline.compute_all_metrics(recs, root, cfg.selection,
                                        workers=cfg.workers, checkpoint_path=out)
    _write_manifest_with_echo(recs, out, cfg)
    log.info("metrics: %d record(s) -> %s", len(recs), out)
    return 0


def _cmd_select(cfg: RunConfig, args) -> int:
    manifest = _require_file(cfg, "manifest")
    out = _require(cfg, "out")
    recs = read_manifest(manifest)
    unmeasured = [r.path for r in recs if r.metrics is None]
    if unmeasured:
        raise InvalidInputError(
            f"{len(unmeasured)} record(s) lack metrics (run `metrics` first), e.g. {unmeasured[0]}"
        )
    pipeline.run_selection(recs, cfg.selection, cfg.scorer, root=cfg.root)
    _write_manifest_with_echo(recs, out, cfg)
    log.info("select: %d/%d selected -> %s", sum(r.selected for r in recs), len(recs), out)
    return 0


def _cmd_stats(cfg: RunConfig, args) -> int:
    manifest = _require_file(cfg, "manifest")
    recs = read_manifest(manifest)
    report = pipeline.stats_report(recs)
    if cfg.json_out:
        payload = {"manifest": str(manifest), **report, "config": run_config_to_dict(cfg)}
        _write_json(payload, cfg.json_out)
        _echo_config(cfg, Path(cfg.json_out).parent)
        log.info("stats: wrote %s", cfg.json_out)
    print(pipeline.format_stats_text(report))
    return 0


def _cmd_caption_merge(cfg: RunConfig, args) -> int:
    manifest = _require_file(cfg, "manifest")
    captions = _require_dir(cfg, "captions")
    out = _require(cfg, "out")
    recs = read_manifest(manifest)
    pipeline.merge_captions(recs, captions)
    _write_manifest_with_echo(recs, out, cfg)
    log.info("caption-merge: %d/%d captioned -> %s",
             sum(r.caption is not None for r in recs), len(recs), out)
    return 0


def _cmd_freq_analyze(cfg: RunConfig, args) -> int:
    source = Path(_require(cfg, "input"))
    edges = cfg.train.band_edges
    from_dir = source.is_dir()
    if from_dir:
        paths = sorted(p for p in source.rglob("*")
                       if p.is_file() and p.suffix.lower() in pipeline.IMAGE_EXTENSIONS)
        names = [p.relative_to(source).as_posix() for p in paths]
    elif source.is_file():
        paths, names = [source], [source.name]
    else:
        raise ConfigError(f"input {source} does not exist")
    rows = []
    for p, name in zip(paths, names):
        try:
            # Luma is scaled to [0, 1] so energies are comparable
            # across bit depths.
            spectrum = freqreg.dft2(pipeline.load_gray(p) / 255.0)
        except Exception as exc:  # noqa: BLE001 - decoders raise a zoo of types
            # An explicitly named file must fail loudly; a directory
            # walk skips undecodables the same way scan does.
            if not from_dir:
                raise
            log.warning("freq-analyze: skipping %s: %s", name, exc)
            continue
        energies = freqreg.band_energies(spectrum, edges)
        rows.append({
            "path": name,
            "band_energies": [float(v) for v in energies],
            "total_energy": float(energies.sum()),
        })
    if from_dir and not rows:
        raise InvalidInputError(f"no decodable images under {source}")
    payload = {
        "band_edges": [float(e) for e in edges],
        "images": rows,
        "config": run_config_to_dict(cfg),
    }
    _emit_json(payload, cfg)
    return 0


def _cmd_dots_sample(cfg: RunConfig, args) -> int:
    if args.count < 1:
        raise ConfigError(f"dots-sample: -n must be >= 1, got {args.count}")
    if args.histogram is not None and args.histogram < 1:
        raise ConfigError(f"dots-sample: --histogram must be >= 1, got {args.histogram}")
    sampler = BetaSampler(cfg.beta, seed=cfg.train.seed)
    draws = sampler.sample(args.count)
    payload = {
        "alpha": cfg.beta.alpha,
        "beta": cfg.beta.beta,
        "n": args.count,
        "seed": cfg.train.seed,
        "time_orientation": dict(TIME_ORIENTATION),
    }
    if args.histogram is not None:
        counts, edges = np.histogram(draws, bins=args.histogram, range=(0.0, 1.0))
        payload["histogram"] = {
            "bins": args.histogram,
            "edges": [float(e) for e in edges],
            "counts": [int(c) for c in counts],
            "argmax_bin": int(np.argmax(counts)),
        }
    else:
        payload["samples"] = [float(v) for v in draws]
    _emit_json(payload, cfg)
    return 0


def _cmd_train_toy(cfg: RunConfig, args) -> int:
    out = Path(_require(cfg, "out"))
    tcfg = cfg.resolved_train()
    result = flowtrain.train(tcfg)
    x0, eps = flowtrain.make_eval_set(tcfg)
    bands = flowtrain.band_error(result.params, x0, eps, tcfg.eval_times, tcfg.band_edges)
    final = result.log[-1] if result.log else None
    report = {
        "n_params": result.params.n_params,
        "steps": tcfg.steps,
        "wall_time_s": result.wall_time_s,
        "final": final,
        "eval_band_edges": [float(e) for e in tcfg.band_edges],
        "eval_band_error": [float(v) for v in bands],
        "time_orientation": dict(TIME_ORIENTATION),
        "config": run_config_to_dict(cfg),
    }
    _write_json(report, out / "report.json")
    lines = [
        f"toy trainer: {tcfg.steps} step(s), {result.params.n_params} parameter(s), "
        f"{result.wall_time_s:.2f} s",
        f"use_beta_timesteps={tcfg.use_beta_timesteps} use_freq_loss={tcfg.use_freq_loss}",
    ]
    if final is not None:
        lines.append(f"final: l_total={final['l_total']:.6f} l_diff={final['l_diff']:.6f} "
                     f"l_freq={final['l_freq']:.6f}")
    lines.append("eval band error: " + "  ".join(
        f"[{tcfg.band_edges[i]:g},{tcfg.band_edges[i + 1]:g}]={bands[i]:.6e}"
        for i in range(len(bands))))
    (out / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _echo_config(cfg, out)
    print("\n".join(lines))
    return 0


def _cmd_compare(cfg: RunConfig, args) -> int:
    out = Path(_require(cfg, "out"))
    tcfg = cfg.resolved_train()
    log.info("compare: %d seed(s), %d training runs", cfg.seeds, cfg.seeds * 2)
    report = flowtrain.experiment_compare(tcfg, cfg.seeds)
    report["config"] = run_config_to_dict(cfg)
    text = flowtrain.format_compare_table(report)
    _write_json(report, out / "report.json")
    (out / "report.txt").write_text(text + "\n", encoding="utf-8")
    _echo_config(cfg, out)
    print(text)
    return 0


_HANDLERS = {
    "scan": _cmd_scan,
    "metrics": _cmd_metrics,
    "select": _cmd_select,
    "stats": _cmd_stats,
    "caption-merge": _cmd_caption_merge,
    "freq-analyze": _cmd_freq_analyze,
    "dots-sample": _cmd_dots_sample,
    "train-toy": _cmd_train_toy,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 0 for --help, 1 via _Parser.error
        return int(exc.code or 0)
    try:
        cfg = _config_from_args(args)
        return _HANDLERS[args.command](cfg, args)
    except (ConfigError, InvalidInputError) as exc:
        log.error("%s", exc)
        return 1
    except UhrkitError as exc:
        log.error("%s", exc)
        return 2
    except OSError as exc:
        log.error("%s", exc)
        return 2


def entrypoint() -> None:
    sys.exit(main())
