"""Acceptance suite.

Each test enforces one numbered criterion at its stated tolerance and prints
one PASS/FAIL line (run with `pytest -s` to see them live). The trained
checkpoints are built once per session by module-scoped fixtures; the full
desk-scale criterion set takes roughly 40 minutes single-threaded.
"""

import time

import numpy as np
import pytest

from anysr.decoder import QueryBatch, gather_neighbors
from anysr.faces import face_corpus, face_image
from anysr.imageops import (
    Image,
    axis_centers,
    make_coord_grid,
    resample_bicubic,
    resample_bilinear,
    resample_nearest,
)
from anysr.gradcheck import run_gradient_suite
from anysr.metrics import psnr_y, ssim_y
from anysr.model import AblationVariant, ModelConfig, SuperResolver
from anysr.evaluate import super_resolve, synthesize_eval_pair
from anysr.trainer import (
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)

DESK_MODEL = ModelConfig(feat_channels=32, res_blocks=4)
DESK_CFG = TrainConfig(
    lr_size=32, scale_min=1.0, scale_max=2.0, batch_size=2, epochs=40,
    learning_rate=1e-3, decay_epoch=30, decay_factor=0.1, delta=1e-3,
    queries_per_image=64, seed=7, model=DESK_MODEL,
)


def rng_for(seed):
    return np.random.Generator(np.random.Philox(seed))


def announce(num, title, passed, detail):
    print(f"\n{'PASS' if passed else 'FAIL'} criterion {num} ({title}): {detail}")
    assert passed, f"criterion {num} ({title}): {detail}"


@pytest.fixture(scope="module")
def train_corpus():
    return face_corpus(100, size=144, seed=1)


@pytest.fixture(scope="module")
def heldout():
    return [face_image(10_000_000 + i) for i in range(20)]


@pytest.fixture(scope="module")
def trained(train_corpus):
    start = time.perf_counter()
    model, adam, log = train(DESK_CFG, train_corpus)
    elapsed = time.perf_counter() - start
    return model, log, elapsed


@pytest.fixture(scope="module")
def variant_models(train_corpus):
    out = {}
    for label in ("-L", "-G", "-S"):
        variant = AblationVariant.from_label(label)
        model, _, _ = train(DESK_CFG, train_corpus, variant=variant)
        out[label] = model
    return out


def eval_mean_psnr(model, images, scale, lr_size=32, variant=None):
    variant = variant or AblationVariant.from_label("full")
    vals = []
    for gt in images:
        lr, hr = synthesize_eval_pair(gt, scale, DESK_CFG, lr_size)
        sr = super_resolve(model, lr, scale, variant=variant)
        vals.append(psnr_y(sr, hr))
    return float(np.mean(vals))


def baseline_mean_psnr(images, scale, lr_size=32, method="bicubic"):
    resample = resample_bicubic if method == "bicubic" else resample_nearest
    vals = []
    for gt in images:
        lr, hr = synthesize_eval_pair(gt, scale, DESK_CFG, lr_size)
        vals.append(psnr_y(resample(lr, hr.height, hr.width), hr))
    return float(np.mean(vals))


def test_criterion_1_gradient_suite():
    start = time.perf_counter()
    results = run_gradient_suite(trials=25)
    elapsed = time.perf_counter() - start
    worst = max(r.max_error for r in results)
    ok = all(r.passed for r in results) and elapsed < 120.0
    announce(1, "gradient suite",
             ok, f"{len(results)} checks, worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_partition_of_unity():
    rng = rng_for(2)
    worst = 0.0
    total = 0
    while total < 10_000:
        h = int(rng.integers(4, 65))
        w = int(rng.integers(4, 65))
        n = int(min(500, 10_000 - total))
        coords = rng.uniform(-1.0, 1.0, size=(n, 2))
        edge = rng.choice([-1.0, 1.0], size=n // 5)
        coords[: n // 5, 0] = edge  # force border-clamped queries
        nb = gather_neighbors(make_coord_grid(h, w), QueryBatch(coords, [0.5, 0.5]))
        worst = max(worst, float(np.max(np.abs(nb.weights.sum(axis=1) - 1.0))))
        total += n
    announce(2, "partition of unity", worst < 1e-12,
             f"10000 queries, max |sum(w) - 1| = {worst:.2e}")


def test_criterion_3_boundary_continuity():
    model = SuperResolver(ModelConfig(), seed=31)
    lr = Image(rng_for(32).uniform(0, 1, (8, 8, 3)))
    prep = model.prepare(lr)
    rng = rng_for(33)
    centers = axis_centers(8)
    eps = 1e-6
    worst = 0.0
    for _ in range(50):
        y = centers[rng.integers(1, 7)]
        x = rng.uniform(-0.9, 0.9)
        lo = model.query(prep, QueryBatch([[y - eps, x]], [0.5, 0.5])).data
        hi = model.query(prep, QueryBatch([[y + eps, x]], [0.5, 0.5])).data
        worst = max(worst, float(np.abs(hi - lo).max()))
        y2 = rng.uniform(-0.9, 0.9)
        x2 = centers[rng.integers(1, 7)]
        lo = model.query(prep, QueryBatch([[y2, x2 - eps]], [0.5, 0.5])).data
        hi = model.query(prep, QueryBatch([[y2, x2 + eps]], [0.5, 0.5])).data
        worst = max(worst, float(np.abs(hi - lo).max()))
    announce(3, "boundary continuity", worst < 1e-4,
             f"100 crossings, max per-channel jump {worst:.2e}")


def test_criterion_4_skip_identity():
    model = SuperResolver(ModelConfig(feat_channels=8, res_blocks=2,
                                      mlp_blocks=3, mlp_width=32), seed=41)
    model.decoder.output.weight.data[:] = 0.0
    model.decoder.output.bias.data[:] = 0.0
    worst = 0.0
    for seed, (h, w), (ry, rx) in [(42, (9, 7), (2.0, 2.0)),
                                   (43, (16, 16), (1.5, 2.5)),
                                   (44, (12, 20), (3.0, 1.0))]:
        lr = Image(rng_for(seed).uniform(0, 1, (h, w, 3)))
        raster = super_resolve(model, lr, ry, rx, clamp=False)
        oh, ow = raster.shape[:2]
        expected = resample_bilinear(lr, oh, ow).pixels
        worst = max(worst, float(np.max(np.abs(raster - expected))))
    announce(4, "skip identity", worst < 1e-12,
             f"max |model - bilinear| = {worst:.2e} before clamping")


def test_criterion_5_arbitrary_scale_contract(trained):
    model, _, _ = trained
    checked = []
    ok = True
    for size in (16, 32, 48):
        lr = Image(rng_for(50 + size).uniform(0, 1, (size, size, 3)))
        for r in (1.5, 2.0, 3.7, 4.0, 8.0):
            sr = super_resolve(model, lr, r)
            want = round(r * size)
            good = (sr.height, sr.width) == (want, want) and np.isfinite(sr.pixels).all()
            ok = ok and good
            checked.append(f"{size}@x{r:g}")
    announce(5, "arbitrary-scale shape contract", ok,
             f"{len(checked)} combinations, all dims round(r*n), all finite")


def test_criterion_6_training_efficacy(trained, heldout):
    model, log, elapsed = trained
    model_psnr = eval_mean_psnr(model, heldout, 2.0)
    bicubic_psnr = baseline_mean_psnr(heldout, 2.0)
    gap = model_psnr - bicubic_psnr
    ok = len(log) >= 2000 and elapsed < 3600.0 and gap >= 0.3
    announce(6, "desk-scale training efficacy", ok,
             f"{len(log)} iterations in {elapsed / 60:.1f} min; x2 PSNR "
             f"{model_psnr:.3f} vs bicubic {bicubic_psnr:.3f} (gap {gap:+.3f} dB)")


def test_criterion_7_ood_scale(trained, heldout):
    model, _, _ = trained
    model_psnr = eval_mean_psnr(model, heldout, 3.0)
    bicubic_psnr = baseline_mean_psnr(heldout, 3.0)
    announce(7, "out-of-distribution scale", model_psnr >= bicubic_psnr,
             f"x3 (never trained): model {model_psnr:.3f} dB vs bicubic "
             f"{bicubic_psnr:.3f} dB")


def test_criterion_8_input_resolution_robustness(trained, heldout):
    model, _, _ = trained
    details = []
    ok = True
    for lr_size in (16, 48):
        model_psnr = eval_mean_psnr(model, heldout, 2.0, lr_size=lr_size)
        nn_psnr = baseline_mean_psnr(heldout, 2.0, lr_size=lr_size, method="nearest")
        ok = ok and np.isfinite(model_psnr) and model_psnr >= nn_psnr
        details.append(f"LR{lr_size}: {model_psnr:.3f} vs nearest {nn_psnr:.3f}")
    announce(8, "input-resolution robustness", ok, "; ".join(details))


def test_criterion_9_ablation_ordering(trained, variant_models, heldout):
    full_model, _, _ = trained
    full_psnr = eval_mean_psnr(full_model, heldout, 4.0)
    details = [f"full {full_psnr:.4f}"]
    ok = True
    for label, model in variant_models.items():
        variant = AblationVariant.from_label(label)
        psnr = eval_mean_psnr(model, heldout, 4.0, variant=variant)
        ok = ok and full_psnr >= psnr
        details.append(f"{label} {psnr:.4f}")
    announce(9, "ablation ordering at x4", ok, ", ".join(details) + " dB")


def test_criterion_10_metric_fidelity():
    from test_metrics import gray_image, oracle_psnr_y, oracle_ssim_y

    worst_psnr = abs(psnr_y(gray_image(103.6, 6, 6), gray_image(104.6, 6, 6))
                     - 20.0 * np.log10(255.0))
    identical = Image(rng_for(100).uniform(0, 1, (16, 16, 3)))
    ssim_identity = ssim_y(identical, Image(identical.pixels.copy()))
    c1 = (0.01 * 255) ** 2
    constant_expected = (2 * 100.0 * 110.0 + c1) / (100.0 ** 2 + 110.0 ** 2 + c1)
    worst_ssim = abs(ssim_y(gray_image(100.0, 12, 12), gray_image(110.0, 12, 12))
                     - constant_expected)

    worst_oracle_psnr = 0.0
    worst_oracle_ssim = 0.0
    for seed in range(20):
        a = Image(rng_for(200 + seed).uniform(0, 1, (14, 15, 3)))
        b = Image(rng_for(300 + seed).uniform(0, 1, (14, 15, 3)))
        worst_oracle_psnr = max(worst_oracle_psnr,
                                abs(psnr_y(a, b) - oracle_psnr_y(a, b)))
        worst_oracle_ssim = max(worst_oracle_ssim,
                                abs(ssim_y(a, b) - oracle_ssim_y(a, b)))
    ok = (worst_psnr < 1e-6 and ssim_identity == 1.0 and worst_ssim < 1e-9
          and worst_oracle_psnr < 1e-9 and worst_oracle_ssim < 1e-9)
    announce(10, "metric fidelity", ok,
             f"closed-form psnr err {worst_psnr:.2e} dB, ssim identity "
             f"{ssim_identity}, constant-mean err {worst_ssim:.2e}, oracle errs "
             f"{worst_oracle_psnr:.2e}/{worst_oracle_ssim:.2e}")


def test_criterion_11_determinism(tmp_path):
    cfg = TrainConfig(
        lr_size=16, scale_min=1.0, scale_max=2.0, batch_size=1, epochs=10,
        learning_rate=1e-3, decay_epoch=100, delta=1e-3, queries_per_image=32,
        seed=23, model=ModelConfig(feat_channels=8, res_blocks=2,
                                   freq_hidden=8, freq_latent=4,
                                   token_channels=8, mlp_blocks=3, mlp_width=32),
    )
    corpus = face_corpus(10, size=48, seed=5)
    logs = []
    models = []
    for _ in range(2):
        model, adam, log = train(cfg, corpus)
        logs.append([(r.iteration, r.epoch, r.scale_y, r.scale_x, r.loss) for r in log])
        models.append((model, adam))
    identical_logs = logs[0] == logs[1] and len(logs[0]) >= 100

    model, adam = models[0]
    path = tmp_path / "det.ckpt"
    rng = rng_for(99)
    save_checkpoint(path, model, cfg, 9, adam, rng)
    ckpt = load_checkpoint(path)
    roundtrip = all(
        np.array_equal(ckpt.model.parameters()[k].data, p.data)
        for k, p in model.parameters().items()
    ) and all(
        np.array_equal(ckpt.adam.m[k], adam.m[k])
        and np.array_equal(ckpt.adam.v[k], adam.v[k])
        for k in adam.m
    )
    announce(11, "determinism", identical_logs and roundtrip,
             f"{len(logs[0])} iterations bit-identical: {identical_logs}; "
             f"checkpoint round-trip bit-exact: {roundtrip}")
