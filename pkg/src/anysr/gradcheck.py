"""Finite-difference verification of every differentiable primitive and of
the composite model paths (encoder, frequency module, modulated MLP, full
training loss).

Central differences are only meaningful where the function is smooth within
the step, so candidate points whose relu/clamp inputs sit too close to a
kink are skipped deterministically before differencing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, finite_difference_check, no_grad, track_kink_margins
from .decoder import ModulatedMLP, QueryBatch, positional_encode
from .encoder import ResidualEncoder, image_to_tensor
from .imageops import Image, make_coord_grid
from .lfe import FrequencyEstimator
from .model import ModelConfig, SuperResolver
from .trainer import charbonnier

TOLERANCE = 1e-4
EPS = 1e-5
MIN_KINK_MARGIN = 1e-3
MAX_SUBSET = 120


@dataclass
class CheckResult:
    name: str
    trials: int
    max_error: float
    passed: bool
    seconds: float


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def _away_from_kinks(values, margin=0.05):
    values = np.asarray(values, dtype=np.float64).copy()
    small = np.abs(values) < margin
    values[small] = values[small] + np.where(values[small] >= 0, margin, -margin)
    return values


def _margin_ok(fn, x: Tensor) -> bool:
    with track_kink_margins() as margins:
        fn(Tensor(x.data.copy()))
    return not margins or min(margins) >= MIN_KINK_MARGIN


def _subset_fd(fn, x: Tensor, eps: float, rng: np.random.Generator,
               floor: float = 1e-12) -> float:
    """Max relative FD error over (a deterministic subset of) components.

    `floor` is the smallest gradient magnitude treated as resolvable: a
    central difference of a scalar of order 0.1 carries ~1e-12 of absolute
    float roundoff at step 1e-5, so components whose analytic and numeric
    values both sit near that noise cannot be compared relatively. Real
    wiring bugs surface as order-of-norm discrepancies and clear the floor.
    """
    probe = Tensor(x.data.copy(), requires_grad=True)
    out = fn(probe)
    out.backward()
    analytic = probe.grad if probe.grad is not None else np.zeros_like(probe.data)
    analytic = analytic.reshape(-1)

    n = probe.data.size
    if n > MAX_SUBSET:
        picks = np.sort(rng.choice(n, size=MAX_SUBSET, replace=False))
    else:
        picks = np.arange(n)
    flat = probe.data.reshape(-1)
    worst = 0.0
    with no_grad():
        for i in picks:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = fn(probe).item()
            flat[i] = orig - eps
            f_minus = fn(probe).item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(analytic[i]), abs(numeric), floor)
            worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


# -- primitive cases ------------------------------------------------------


def _primitive_cases():
    return {
        "add": lambda t, c: (t + Tensor(c)).sum(),
        "mul": lambda t, c: (t * Tensor(c)).sum(),
        "neg": lambda t, c: (-t).sin().sum(),
        "matmul": lambda t, c: t.reshape(4, 4).matmul(Tensor(c.reshape(4, 4))).sin().sum(),
        "relu": lambda t, c: (t.relu() * Tensor(c)).sum(),
        "sin": lambda t, c: t.sin().sum(),
        "exp": lambda t, c: (t * 0.3).exp().sum(),
        "sqrt": lambda t, c: (t * t + 0.5).sqrt().sum(),
        "clamp": lambda t, c: t.clamp(-0.8, 0.8).sin().sum(),
        "reshape": lambda t, c: t.reshape(4, 4).sin().sum(),
        "transpose": lambda t, c: (t.reshape(4, 4).T * Tensor(c.reshape(4, 4))).sum(),
        "sum": lambda t, c: (t.sin().sum() * t.sum()).sum(),
        "mean": lambda t, c: (t * Tensor(c)).mean(),
        "concat": lambda t, c: concat([t.sin(), t * 2.0], axis=0).sin().sum(),
        "take_columns": lambda t, c: t.reshape(4, 4).take_columns([0, 2, 2, 3]).sin().sum(),
        "unfold3x3": lambda t, c: (t.reshape(1, 4, 4).unfold3x3() * 0.5).sin().sum(),
    }


def _check_primitive(name, case, trials, eps) -> CheckResult:
    start = time.perf_counter()
    rng = _rng(abs(hash_name(name)))
    worst = 0.0
    for _ in range(trials):
        data = _away_from_kinks(rng.uniform(-1.0, 1.0, size=16))
        if name == "clamp":
            data = np.where(np.abs(np.abs(data) - 0.8) < 0.05,
                            np.sign(data) * 0.7, data)
        coeff = rng.uniform(0.2, 1.0, size=16)
        err = finite_difference_check(lambda t: case(t, coeff), Tensor(data), eps=eps)
        worst = max(worst, err)
    return CheckResult(f"primitive/{name}", trials, worst, worst < TOLERANCE,
                       time.perf_counter() - start)


def hash_name(name: str) -> int:
    import zlib

    return zlib.crc32(name.encode())


# -- composite paths ------------------------------------------------------


def _composite_builders():
    def encoder_case(seed):
        enc = ResidualEncoder(_rng(seed), channels=4, blocks=1)
        img = Image(_rng(seed + 7_000_000).uniform(0, 1, (5, 5, 3)))
        forward = lambda: enc(image_to_tensor(img)).mean()
        sites = [enc.head, enc.blocks[0][0], enc.blocks[0][1], enc.tail]
        return forward, sites

    def lfe_case(seed):
        lfe = FrequencyEstimator(_rng(seed), hidden=4, latent=2, tokens=3)
        img = Image(_rng(seed + 7_000_000).uniform(0, 1, (4, 4, 3)))

        def forward():
            z = lfe.sample(*lfe.distribution(img), mode="train", rng=_rng(5))
            return lfe.decode(z).mean()

        sites = [lfe.conv1, lfe.conv2, lfe.head_mu, lfe.head_logvar, lfe.dec1, lfe.dec2]
        return forward, sites

    def mlp_case(seed):
        mlp = ModulatedMLP(_rng(seed), feature_len=6, depth=3, width=8)
        rng = _rng(seed + 7_000_000)
        features = Tensor(rng.normal(size=(4, 6)))
        rel = Tensor(rng.uniform(-1, 1, size=(4, 2)))
        ratio = Tensor(np.full((4, 2), 0.5))
        g_s = Tensor(positional_encode(rng.uniform(-1, 1, size=(4, 2))))
        forward = lambda: mlp(features, rel, ratio, g_s).mean()
        sites = mlp.content + mlp.modulation + [mlp.output]
        return forward, sites

    def loss_case(seed):
        cfg = ModelConfig(feat_channels=3, res_blocks=1, freq_hidden=3, freq_latent=2,
                          token_channels=2, mlp_blocks=2, mlp_width=6)
        model = SuperResolver(cfg, rng=_rng(seed))
        rng = _rng(seed + 7_000_000)
        lr = Image(rng.uniform(0, 1, (4, 4, 3)))
        coords = make_coord_grid(6, 6).coords[rng.choice(36, size=6, replace=False)]
        queries = QueryBatch(coords, [4 / 6, 4 / 6])
        targets = rng.uniform(0, 1, (6, 3))

        def forward():
            prep = model.prepare(lr, mode="train", rng=_rng(11))
            return charbonnier(model.query(prep, queries), targets, 1e-3)

        sites = [model.encoder.head, model.encoder.blocks[0][0], model.encoder.tail,
                 model.lfe.conv1, model.lfe.head_mu, model.lfe.head_logvar,
                 model.lfe.dec1, model.decoder.content[0], model.decoder.content[1],
                 model.decoder.modulation[0], model.decoder.output]
        return forward, sites

    return {"encoder": encoder_case, "lfe": lfe_case,
            "modulated_mlp": mlp_case, "full_loss": loss_case}


def _check_composite(name, builder, trials, eps) -> CheckResult:
    start = time.perf_counter()
    worst = 0.0
    done = 0
    seed = hash_name(name) % 10_000
    attempts = 0
    while done < trials:
        attempts += 1
        if attempts > 60 * trials:
            raise RuntimeError(f"{name}: could not find enough kink-free points")
        forward, sites = builder(seed)
        seed += 1
        if not _margin_ok(lambda _t: forward(), Tensor(np.zeros(1))):
            continue
        # cycle deterministically through parameter tensors
        site = sites[done % len(sites)]
        attr = "weight" if done % 2 == 0 or site.bias is None else "bias"
        original = getattr(site, attr)

        def fn(t):
            setattr(site, attr, t)
            try:
                return forward()
            finally:
                setattr(site, attr, original)

        err = _subset_fd(fn, original, eps, _rng(seed + 13), floor=1e-7)
        worst = max(worst, err)
        done += 1
    return CheckResult(f"composite/{name}", trials, worst, worst < TOLERANCE,
                       time.perf_counter() - start)


def run_gradient_suite(trials: int = 25, eps: float = EPS) -> list:
    """All primitive and composite checks; each entry reports the worst
    relative error across its trials.

    Composite checks compare with a resolvability floor of 1e-7 (see
    _subset_fd): deep-path parameters can carry legitimately negligible
    gradients that double-precision differencing cannot certify relatively.
    """
    results = [
        _check_primitive(name, case, trials, eps)
        for name, case in _primitive_cases().items()
    ]
    results += [
        _check_composite(name, builder, trials, eps)
        for name, builder in _composite_builders().items()
    ]
    return results
