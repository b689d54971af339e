"""Acceptance gate: the nine headline criteria, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the
per-criterion lines; the compare experiment (criterion 8) trains 20
models and dominates the runtime.
"""

import json
import subprocess
import sys
import time

import numpy as np

from oracles import (
    beta_cdf_int,
    central_diff,
    glcm_pairs,
    ks_distance,
    select_oracle,
    simpson,
)
from uhrkit.cli import main
from uhrkit.config import BetaParams, FreqRegConfig, SelectionConfig, TrainConfig
from uhrkit.flowtrain import PredictorParams, init_params, loss_and_grad
from uhrkit.freqreg import dft2, freq_loss, freq_loss_grad, idft2, soft_weight
from uhrkit.metrics import (
    glcm,
    glcm_score,
    laplacian_variance,
    quantize_levels,
    shannon_entropy,
    sobel_edge_density,
)
from uhrkit.records import read_manifest
from uhrkit.timesteps import BetaSampler, beta_cdf, beta_pdf


def _report(n: int, ok: bool, detail: str) -> None:
    print(f"[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {n}: {detail}"


def test_criterion_1_trivial_metric_suite():
    t0 = time.perf_counter()
    flat = np.full((64, 64), 77.0)
    lap = laplacian_variance(flat)
    sed = sobel_edge_density(flat, 50.0)
    ent = shannon_entropy(flat)
    _, aggregate = glcm_score(flat, levels=32, distance=1)
    uniform = np.arange(256, dtype=np.float64).reshape(16, 16)
    ent_uniform = shannon_entropy(uniform)
    elapsed = time.perf_counter() - t0
    ok = (lap == 0.0 and sed == 0.0 and ent == 0.0 and aggregate == 0.0
          and abs(ent_uniform - 8.0) <= 1e-12 and elapsed < 1.0)
    _report(1, ok, f"flat metrics ({lap}, {sed}, {ent}, {aggregate}), "
                   f"uniform entropy {ent_uniform!r}, {elapsed:.3f}s")


def test_criterion_2_glcm_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    levels = 8
    offsets = ((1, 0), (1, 1), (0, 1), (-1, 1))
    worst = 0.0
    for _ in range(100):
        img = rng.uniform(0.0, 255.0, size=(8, 8))
        idx = quantize_levels(img, levels)
        for off in offsets:
            got = glcm(idx, levels, off)
            want = np.array(glcm_pairs(idx, levels, off))
            worst = max(worst, float(np.abs(got - want).max()))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 5.0
    _report(2, ok, f"100 images x 4 directions, max |diff| {worst:.3e}, {elapsed:.2f}s")


def test_criterion_3_selection_oracle(corpus64, tmp_path):
    from conftest import CORPUS_THRESHOLDS

    t0 = time.perf_counter()
    manifest = tmp_path / "m.jsonl"
    selected = tmp_path / "sel.jsonl"
    flags = ["--min-avg-resolution", str(CORPUS_THRESHOLDS["min_avg_resolution"]),
             "--laplacian-min", str(CORPUS_THRESHOLDS["laplacian_min"]),
             "--sobel-density-min", str(CORPUS_THRESHOLDS["sobel_density_min"]),
             "--sobel-grad-threshold", str(CORPUS_THRESHOLDS["sobel_grad_threshold"]),
             "--metric-long-side", "64"]
    assert main(["metrics", "--root", str(corpus64), "--out", str(manifest), *flags]) == 0
    assert main(["select", "--root", str(corpus64), "--manifest", str(manifest),
                 "--out", str(selected), *flags, "--top-fraction", "0.5"]) == 0

    recs = read_manifest(selected)
    rows = [{
        "path": r.path, "width": r.width, "height": r.height,
        "laplacian_var": r.metrics.laplacian_var,
        "sobel_edge_density": r.metrics.sobel_edge_density,
        "glcm_aggregate": r.metrics.glcm_aggregate,
        "shannon_entropy": r.metrics.shannon_entropy,
        "aesthetic": r.metrics.aesthetic,
    } for r in recs]
    want = select_oracle(rows, 0.5, CORPUS_THRESHOLDS["laplacian_min"],
                         CORPUS_THRESHOLDS["sobel_density_min"],
                         CORPUS_THRESHOLDS["min_avg_resolution"])
    got = {
        "passed": {r.path for r in recs if r.passed_filter},
        "texture": {r.path for r in recs if r.top_texture},
        "entropy": {r.path for r in recs if r.top_entropy},
        "aesthetic": {r.path for r in recs if r.top_aesthetic},
        "selected": {r.path for r in recs if r.selected},
    }
    aggs = [r.metrics.glcm_aggregate for r in recs if r.passed_filter]
    has_ties = len(set(aggs)) < len(aggs)
    elapsed = time.perf_counter() - t0
    ok = (len(recs) == 64 and got == want and has_ties and elapsed < 30.0)
    _report(3, ok, f"64 records, {len(got['selected'])} selected == oracle, "
                   f"ties present: {has_ties}, {elapsed:.1f}s")


def test_criterion_4_parallel_determinism(corpus50, tmp_path):
    outs = []
    for workers in (1, 4, 8):
        out = tmp_path / f"w{workers}.jsonl"
        rc = main(["metrics", "--root", str(corpus50), "--out", str(out),
                   "--workers", str(workers), "--metric-long-side", "80"])
        assert rc == 0
        outs.append(out.read_bytes())
    n = len(read_manifest(tmp_path / "w1.jsonl"))
    ok = n == 50 and outs[0] == outs[1] == outs[2]
    _report(4, ok, f"50-image corpus, workers 1/4/8 manifests byte-identical: "
                   f"{outs[0] == outs[1] == outs[2]}")


def test_criterion_5_spectral_reductions():
    rng = np.random.default_rng(5)
    cfg0 = FreqRegConfig(lam=0.0)
    worst_loss = 0.0
    worst_inv = 0.0
    for _ in range(100):
        x = rng.normal(size=(16, 16))
        y = rng.normal(size=(16, 16))
        worst_loss = max(worst_loss, abs(freq_loss(x, y, cfg0) - float(np.mean((x - y) ** 2))))
        worst_inv = max(worst_inv, float(np.abs(idft2(dft2(x)) - x).max()))
    endpoints_exact = all(
        soft_weight(0.0, FreqRegConfig(lam=lam, gamma=g)) == 1.0
        and soft_weight(1.0, FreqRegConfig(lam=lam, gamma=g)) == 1.0 + lam
        for lam in (0.0, 0.5, 1.0, 2.0) for g in (1.0, 4.0, 8.0)
    )
    ok = worst_loss < 1e-9 and worst_inv < 1e-9 and endpoints_exact
    _report(5, ok, f"lam=0 |loss-MSE| {worst_loss:.2e}, inverse residual {worst_inv:.2e}, "
                   f"weight endpoints exact: {endpoints_exact}")


def _rel_err(got: np.ndarray, num: np.ndarray) -> float:
    scale = max(float(np.abs(num).max()), 1e-8)
    return float(np.abs(got - num).max()) / scale


def test_criterion_6_gradient_checks():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    worst_field = 0.0
    for _ in range(20):
        cfg = FreqRegConfig(lam=float(rng.uniform(0.0, 2.0)),
                            gamma=float(rng.uniform(1.0, 8.0)))
        x = rng.normal(size=(16, 16))
        y = rng.normal(size=(16, 16))
        grad = freq_loss_grad(x, y, cfg)
        num = central_diff(lambda z: freq_loss(z, y, cfg), x)
        worst_field = max(worst_field, _rel_err(grad, num))

    tcfg = TrainConfig(image_size=8, steps=1, batch_size=3, bias_bins=4,
                       eval_size=2, eval_times=(0.5,))
    worst_param = 0.0
    for k in range(20):
        params = init_params(np.random.default_rng(100 + k), tcfg.bias_bins)
        params.bias = rng.normal(0.0, 0.1, size=tcfg.bias_bins)
        x0 = rng.normal(size=(3, 8, 8))
        eps = rng.normal(size=(3, 8, 8))
        t = rng.uniform(0.05, 0.95, size=3)
        out = loss_and_grad(params, x0, eps, t, tcfg)
        got = np.concatenate([out.grad_kernel.ravel(), out.grad_bias])

        def f(vec):
            p = PredictorParams(vec[:25].reshape(5, 5), vec[25:])
            return loss_and_grad(p, x0, eps, t, tcfg).l_total

        vec = np.concatenate([params.kernel.ravel(), params.bias])
        num = central_diff(f, vec)
        worst_param = max(worst_param, _rel_err(got, num))
    elapsed = time.perf_counter() - t0
    ok = worst_field < 1e-5 and worst_param < 1e-5 and elapsed < 10.0
    _report(6, ok, f"20+20 instances, rel err field {worst_field:.2e} / "
                   f"params {worst_param:.2e}, {elapsed:.1f}s")


def test_criterion_7_timestep_distribution(tmp_path):
    # the five shape pairs exercised by the sweep in the source material
    pairs = ((3, 4), (1, 4), (2, 5), (2, 3), (2, 4))
    worst_area = 0.0
    for a, b in pairs:
        p = BetaParams(float(a), float(b))
        area = simpson(lambda t: beta_pdf(t, p), 1e-9, 1.0 - 1e-9, 4096)
        worst_area = max(worst_area, abs(area - 1.0))

    p24 = BetaParams(2.0, 4.0)
    samples = BetaSampler(p24, seed=0).sample(100000)
    ks = ks_distance(samples, lambda t: beta_cdf(t, p24))
    cdf_ok = all(
        abs(beta_cdf(t, BetaParams(float(a), float(b))) - beta_cdf_int(t, a, b)) < 1e-10
        for a, b in pairs for t in (0.1, 0.25, 0.5, 0.9)
    )

    json_out = tmp_path / "dots.json"
    rc = main(["dots-sample", "--alpha", "2", "--beta", "4", "-n", "100000",
               "--histogram", "100", "--seed", "3", "--json", str(json_out)])
    assert rc == 0
    hist = json.loads(json_out.read_text(encoding="utf-8"))["histogram"]
    k = hist["argmax_bin"]
    contains_mode = hist["edges"][k] <= 0.25 <= hist["edges"][k + 1]

    # cross-check: the most likely bin by exact bin mass also contains 0.25
    masses = [beta_cdf((i + 1) / 100.0, p24) - beta_cdf(i / 100.0, p24) for i in range(100)]
    k_exact = int(np.argmax(masses))
    exact_contains = hist["edges"][k_exact] <= 0.25 <= hist["edges"][k_exact + 1]

    ok = (worst_area < 1e-6 and ks < 0.01 and cdf_ok and contains_mode and exact_contains)
    _report(7, ok, f"pdf area err {worst_area:.2e} over {len(pairs)} shape pairs, "
                   f"KS {ks:.4f}, argmax bin [{hist['edges'][k]:.2f},{hist['edges'][k + 1]:.2f}] "
                   f"contains 0.25: {contains_mode}")


def test_criterion_8_mechanism_experiment(tmp_path):
    out = tmp_path / "cmp"
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "uhrkit", "compare", "--seeds", "10", "--out", str(out)],
        capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    assert proc.returncode == 0, proc.stderr[-2000:]
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    wins = report["high_band_wins"]
    low_ok = report["low_band_ok_count"]
    ok = wins >= 8 and low_ok >= 8 and elapsed < 600.0
    _report(8, ok, f"high-band wins {wins}/10, low-band within 1.2x {low_ok}/10, "
                   f"{elapsed / 60.0:.1f} min")


def test_criterion_9_pinned_defaults():
    sel = SelectionConfig()
    beta = BetaParams()
    ok = (sel.top_fraction == 0.5 and sel.min_avg_resolution == 3000.0
          and beta.alpha == 2.0 and beta.beta == 4.0
          and TrainConfig().beta == BetaParams(2.0, 4.0))
    _report(9, ok, f"top_fraction {sel.top_fraction}, min_avg_resolution "
                   f"{sel.min_avg_resolution}, shapes ({beta.alpha}, {beta.beta})")
