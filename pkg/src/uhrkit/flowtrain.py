"""Desk-scale velocity-prediction trainer on synthetic textures.

The forward process interpolates linearly between a clean texture and
Gaussian noise, z_t = (1 - t) * x0 + t * eps with t = 0 at the data
end, and the regression target is the constant velocity of that path,
v = eps - x0.  The predictor is deliberately tiny: one 5x5 convolution
kernel (zero padding, same-size output) plus one scalar bias per
uniform t-bin, 41 parameters in total.  Gradients are computed
analytically and checked against finite differences in the tests.

Training minimizes  L = mse(v_hat, v) + lambda_freq * L_spec  where
L_spec is the radially weighted spectral loss from freqreg.  Timesteps
are drawn either uniformly or from the Beta sampler; textures and
noise come from random streams that do not depend on those choices, so
two runs with the same seed but different flags see identical data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .config import TrainConfig
from .errors import InvalidInputError, NumericalError
from .freqreg import band_energies, dft2, weight_field
from .textures import TextureSpec, gen_texture
from .timesteps import TIME_ORIENTATION, BetaSampler

__all__ = [
    "KERNEL_SIZE",
    "PredictorParams",
    "init_params",
    "time_bin",
    "conv_same",
    "forward_diffuse",
    "velocity_target",
    "predict",
    "LossBreakdown",
    "loss_and_grad",
    "TrainResult",
    "train",
    "make_eval_set",
    "band_error",
    "experiment_compare",
    "format_compare_table",
]

KERNEL_SIZE = 5
_PAD = KERNEL_SIZE // 2


@dataclass
class PredictorParams:
    """One shared conv kernel plus a per-t-bin scalar bias."""

    kernel: np.ndarray  # (5, 5)
    bias: np.ndarray    # (bias_bins,)

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.kernel.shape != (KERNEL_SIZE, KERNEL_SIZE):
            raise InvalidInputError(f"kernel must be {KERNEL_SIZE}x{KERNEL_SIZE}, got {self.kernel.shape}")
        if self.bias.ndim != 1 or self.bias.size < 1:
            raise InvalidInputError(f"bias must be a non-empty vector, got shape {self.bias.shape}")

    @property
    def n_params(self) -> int:
        return self.kernel.size + self.bias.size

    def copy(self) -> "PredictorParams":
        return PredictorParams(self.kernel.copy(), self.bias.copy())


def init_params(rng: np.random.Generator, bias_bins: int = 16) -> PredictorParams:
    """Kernel ~ N(0, 0.02^2), biases zero."""
    kernel = rng.normal(0.0, 0.02, size=(KERNEL_SIZE, KERNEL_SIZE))
    return PredictorParams(kernel, np.zeros(int(bias_bins)))


def time_bin(t: float, n_bins: int) -> int:
    """Uniform bin index for t in [0, 1); the last bin also takes t = 1."""
    n = int(n_bins)
    if n < 1:
        raise InvalidInputError(f"n_bins must be >= 1, got {n_bins!r}")
    tf = float(t)
    if not (0.0 <= tf <= 1.0):
        raise InvalidInputError(f"t must lie in [0, 1], got {t!r}")
    return min(int(tf * n), n - 1)


def _windows(fields: np.ndarray) -> np.ndarray:
    """Zero-padded sliding 5x5 windows: (B, H, W) -> (B, H, W, 5, 5)."""
    padded = np.pad(fields, ((0, 0), (_PAD, _PAD), (_PAD, _PAD)))
    return np.lib.stride_tricks.sliding_window_view(padded, (KERNEL_SIZE, KERNEL_SIZE), axis=(1, 2))


def conv_same(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Cross-correlation with zero padding, output the same size as x."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"x must be 2-D, got shape {a.shape}")
    k = np.asarray(kernel, dtype=np.float64)
    if k.shape != (KERNEL_SIZE, KERNEL_SIZE):
        raise InvalidInputError(f"kernel must be {KERNEL_SIZE}x{KERNEL_SIZE}, got {k.shape}")
    return np.einsum("hwuv,uv->hw", _windows(a[None])[0], k)


def forward_diffuse(x0: np.ndarray, eps: np.ndarray, t: float) -> np.ndarray:
    """z_t = (1 - t) * x0 + t * eps for t in (0, 1)."""
    a = np.asarray(x0, dtype=np.float64)
    e = np.asarray(eps, dtype=np.float64)
    if a.shape != e.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {e.shape}")
    tf = float(t)
    if not (0.0 < tf < 1.0):
        raise InvalidInputError(f"t must lie in (0, 1), got {t!r}")
    return (1.0 - tf) * a + tf * e


def velocity_target(x0: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Constant path velocity eps - x0 (independent of t)."""
    a = np.asarray(x0, dtype=np.float64)
    e = np.asarray(eps, dtype=np.float64)
    if a.shape != e.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {e.shape}")
    return e - a


def predict(params: PredictorParams, z: np.ndarray, t: float) -> np.ndarray:
    """Velocity estimate conv(z) + bias[bin(t)]."""
    return conv_same(z, params.kernel) + params.bias[time_bin(t, params.bias.size)]


@dataclass
class LossBreakdown:
    l_total: float
    l_diff: float
    l_freq: float
    grad_kernel: np.ndarray
    grad_bias: np.ndarray


def loss_and_grad(params: PredictorParams, x0: np.ndarray, eps: np.ndarray, t: np.ndarray,
                  cfg: TrainConfig) -> LossBreakdown:
    """Batch loss and analytic parameter gradients.

    x0, eps: (B, H, W); t: (B,) in (0, 1).  The spectral term and its
    gradient are averaged over the batch; with use_freq_loss off they
    are reported as 0 and never computed.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if x0.ndim != 3 or x0.shape != eps.shape or t.shape != (x0.shape[0],):
        raise InvalidInputError("expected x0, eps of shape (B, H, W) and t of shape (B,)")
    b, h, w = x0.shape
    n_bins = params.bias.size

    z = (1.0 - t)[:, None, None] * x0 + t[:, None, None] * eps
    v = eps - x0
    bins = np.array([time_bin(tv, n_bins) for tv in t])

    win = _windows(z)
    v_hat = np.einsum("bhwuv,uv->bhw", win, params.kernel) + params.bias[bins][:, None, None]
    resid = v_hat - v

    l_diff = float(np.sum(resid * resid) / (b * h * w))
    grad_field = (2.0 / (b * h * w)) * resid

    l_freq = 0.0
    if cfg.use_freq_loss:
        # Same per-sample arithmetic as freq_loss / freq_loss_grad with
        # the transforms batched over the leading axis.
        wf = weight_field(h, w, cfg.freq)
        spectra = np.fft.fftshift(np.fft.fft2(resid, norm="ortho"), axes=(-2, -1))
        l_freq = float(np.sum((wf * np.abs(spectra)) ** 2) / (b * h * w))
        back = np.fft.ifft2(np.fft.ifftshift(wf * wf * spectra, axes=(-2, -1)), norm="ortho")
        # wf is symmetric under frequency negation, so the inverse is
        # real up to rounding; anything bigger means a broken weight.
        scale = max(1.0, float(np.abs(back.real).max()))
        if float(np.abs(back.imag).max()) >= 1e-9 * scale:
            raise InvalidInputError("spectral gradient is not real")
        grad_field += (cfg.lambda_freq * 2.0 / (b * h * w)) * back.real

    l_total = l_diff + cfg.lambda_freq * l_freq if cfg.use_freq_loss else l_diff

    grad_kernel = np.einsum("bhwuv,bhw->uv", win, grad_field)
    grad_bias = np.zeros(n_bins)
    np.add.at(grad_bias, bins, grad_field.sum(axis=(1, 2)))

    return LossBreakdown(l_total, l_diff, l_freq, grad_kernel, grad_bias)


@dataclass
class TrainResult:
    params: PredictorParams
    log: list[dict]
    config: TrainConfig
    wall_time_s: float


def _streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent, reproducible random streams for one run.

    Timestep draws get their own stream so toggling the Beta sampler
    cannot shift the texture or noise sequences.
    """
    children = np.random.SeedSequence(seed).spawn(6)
    names = ("init", "textures", "noise", "times", "eval_textures", "eval_noise")
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def _draw_textures(rng: np.random.Generator, count: int, size: int) -> np.ndarray:
    seeds = rng.integers(0, 2 ** 62, size=count)
    return np.stack([gen_texture(TextureSpec(size=size, seed=int(s))) for s in seeds])


def train(cfg: TrainConfig) -> TrainResult:
    """Plain SGD over freshly sampled batches; fully seeded."""
    if not isinstance(cfg, TrainConfig):
        raise InvalidInputError(f"cfg must be a TrainConfig, got {type(cfg).__name__}")
    t_start = time.perf_counter()
    rngs = _streams(cfg.seed)
    params = init_params(rngs["init"], cfg.bias_bins)
    sampler = BetaSampler(cfg.beta, rng=rngs["times"]) if cfg.use_beta_timesteps else None
    log: list[dict] = []
    clamp = 1e-12
    for step in range(cfg.steps):
        x0 = _draw_textures(rngs["textures"], cfg.batch_size, cfg.image_size)
        eps = rngs["noise"].standard_normal((cfg.batch_size, cfg.image_size, cfg.image_size))
        if sampler is not None:
            t = sampler.sample(cfg.batch_size)
        else:
            t = np.clip(rngs["times"].random(cfg.batch_size), clamp, 1.0 - clamp)
        out = loss_and_grad(params, x0, eps, t, cfg)
        if not np.isfinite(out.l_total):
            raise NumericalError(f"loss became non-finite ({out.l_total!r})", step=step)
        params.kernel = params.kernel - cfg.learning_rate * out.grad_kernel
        params.bias = params.bias - cfg.learning_rate * out.grad_bias
        log.append({"step": step, "l_total": out.l_total, "l_diff": out.l_diff, "l_freq": out.l_freq})
    return TrainResult(params, log, cfg, time.perf_counter() - t_start)


def make_eval_set(cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Held-out textures and noise, independent of the training streams.

    Two runs with the same seed share the exact same eval set no matter
    which training flags they used.
    """
    rngs = _streams(cfg.seed)
    x0 = _draw_textures(rngs["eval_textures"], cfg.eval_size, cfg.image_size)
    eps = rngs["eval_noise"].standard_normal(x0.shape)
    return x0, eps


def band_error(params: PredictorParams, x0: np.ndarray, eps: np.ndarray,
               times, edges) -> np.ndarray:
    """Mean spectral energy of the velocity residual per radial band.

    The residual v_hat - v is transformed per (sample, time) pair and
    |.|^2 is summed within each band, divided by H*W so the bands add
    up to the spatial MSE, then averaged over pairs.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.ndim != 3 or x0.shape != eps.shape:
        raise InvalidInputError("expected x0, eps of shape (N, H, W)")
    times = [float(t) for t in times]
    if not times:
        raise InvalidInputError("times must be non-empty")
    h, w = x0.shape[1:]
    acc = np.zeros(len(tuple(edges)) - 1)
    count = 0
    for i in range(x0.shape[0]):
        v = velocity_target(x0[i], eps[i])
        for t in times:
            z = forward_diffuse(x0[i], eps[i], t)
            resid = predict(params, z, t) - v
            acc += band_energies(dft2(resid), edges) / (h * w)
            count += 1
    return acc / count


def experiment_compare(cfg: TrainConfig, n_seeds: int,
                       baseline: tuple[bool, bool] = (False, False),
                       treated: tuple[bool, bool] = (True, True),
                       low_band_tolerance: float = 0.2) -> dict:
    """Paired baseline/treated comparison over consecutive seeds.

    Both arms of a pair train on identical texture and noise streams;
    they differ only in (use_beta_timesteps, use_freq_loss).  Returns
    per-seed band errors plus win counts: a high-band win means the
    treated arm has strictly lower top-band error, and the low-band
    check passes when the treated bottom-band error is within
    (1 + low_band_tolerance) times the baseline's.
    """
    if int(n_seeds) < 1:
        raise InvalidInputError(f"n_seeds must be >= 1, got {n_seeds!r}")
    rows = []
    runs = 0
    for i in range(int(n_seeds)):
        seed = cfg.seed + i
        cfg_b = replace(cfg, seed=seed, use_beta_timesteps=baseline[0], use_freq_loss=baseline[1])
        cfg_t = replace(cfg, seed=seed, use_beta_timesteps=treated[0], use_freq_loss=treated[1])
        res_b = train(cfg_b)
        res_t = train(cfg_t)
        runs += 2
        x0, eps = make_eval_set(cfg_b)
        bands_b = band_error(res_b.params, x0, eps, cfg.eval_times, cfg.band_edges)
        bands_t = band_error(res_t.params, x0, eps, cfg.eval_times, cfg.band_edges)
        low_ratio = float(bands_t[0] / bands_b[0]) if bands_b[0] > 0 else (1.0 if bands_t[0] == 0 else float("inf"))
        rows.append({
            "seed": seed,
            "baseline_bands": [float(v) for v in bands_b],
            "treated_bands": [float(v) for v in bands_t],
            "high_band_win": bool(bands_t[-1] < bands_b[-1]),
            "low_band_ratio": low_ratio,
            "low_band_ok": bool(bands_t[0] <= (1.0 + low_band_tolerance) * bands_b[0]),
        })
    return {
        "n_seeds": int(n_seeds),
        "training_runs": runs,
        "arms": {
            "baseline": {"use_beta_timesteps": baseline[0], "use_freq_loss": baseline[1]},
            "treated": {"use_beta_timesteps": treated[0], "use_freq_loss": treated[1]},
        },
        "band_edges": [float(e) for e in cfg.band_edges],
        "eval_times": [float(t) for t in cfg.eval_times],
        "low_band_tolerance": float(low_band_tolerance),
        "rows": rows,
        "high_band_wins": sum(r["high_band_win"] for r in rows),
        "low_band_ok_count": sum(r["low_band_ok"] for r in rows),
        "time_orientation": dict(TIME_ORIENTATION),
    }


def format_compare_table(report: dict) -> str:
    """Plain-text view of an experiment_compare report."""
    edges = report["band_edges"]
    band_names = [f"[{edges[i]:g},{edges[i + 1]:g})" for i in range(len(edges) - 1)]
    band_names[-1] = band_names[-1][:-1] + "]"
    lines = []
    header = f"{'seed':>6} | " + " | ".join(f"base {b:>12}" for b in band_names)
    header += " | " + " | ".join(f"trt {b:>13}" for b in band_names)
    header += " | high win | low ratio"
    lines.append(header)
    lines.append("-" * len(header))
    for r in report["rows"]:
        cells = [f"{r['seed']:>6}"]
        cells += [f"{v:>17.6e}" for v in r["baseline_bands"]]
        cells += [f"{v:>17.6e}" for v in r["treated_bands"]]
        cells.append("yes" if r["high_band_win"] else " no")
        cells.append(f"{r['low_band_ratio']:.3f}")
        lines.append(" | ".join(cells))
    lines.append("-" * len(header))
    lines.append(
        f"high-band wins: {report['high_band_wins']}/{report['n_seeds']}   "
        f"low-band within {1 + report['low_band_tolerance']:.2f}x: "
        f"{report['low_band_ok_count']}/{report['n_seeds']}"
    )
    return "\n".join(lines)
