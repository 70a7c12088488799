"""Training: LR/HR pair synthesis, Charbonnier objective, Adam with step
decay, per-iteration loss logging, and bit-exact checkpointing."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteError, Tensor, concat
from .decoder import QueryBatch
from .imageops import Image, make_coord_grid, resample_bicubic, resample_nearest, scaled_size
from .model import FULL, AblationVariant, ModelConfig, SuperResolver


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr_size: int = 64
    scale_min: float = 1.0
    scale_max: float = 2.0
    batch_size: int = 16
    epochs: int = 200
    learning_rate: float = 1e-4
    decay_epoch: int = 100
    decay_factor: float = 0.1
    delta: float = 1e-3
    queries_per_image: int = 64
    seed: int = 0
    degradation: str = "bicubic"
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if not (1 <= self.scale_min <= self.scale_max):
            raise ValueError("need 1 <= scale_min <= scale_max")
        if self.lr_size < 8:
            raise ValueError("lr_size must be at least 8")
        if self.queries_per_image < 1:
            raise ValueError("queries_per_image must be at least 1")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.degradation not in ("bicubic", "nearest"):
            raise ValueError(f"unknown degradation {self.degradation!r}")

    def to_dict(self) -> dict:
        out = {
            "lr_size": self.lr_size,
            "scale_min": self.scale_min,
            "scale_max": self.scale_max,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "decay_epoch": self.decay_epoch,
            "decay_factor": self.decay_factor,
            "delta": self.delta,
            "queries_per_image": self.queries_per_image,
            "seed": self.seed,
            "degradation": self.degradation,
            "model": self.model.to_dict(),
        }
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        raw = dict(raw)
        model = ModelConfig(**raw.pop("model", {}))
        return cls(model=model, **raw)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Initial rate before the decay epoch; multiplied by the decay factor at
    and after it (a single step)."""
    if epoch < 0 or epoch >= cfg.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if epoch >= cfg.decay_epoch:
        return cfg.learning_rate * cfg.decay_factor
    return cfg.learning_rate


def synthesize_pair(gt: Image, scale, cfg: TrainConfig, rng: np.random.Generator):
    """Build one (lr, hr, queries, targets) training example.

    hr is the ground truth bicubic-resampled to round(scale * lr_size); lr is
    the degradation resample of hr down to lr_size, keeping the pair exactly
    scale-consistent at fractional scales. Query coordinates are drawn
    uniformly without replacement from hr's cell grid, in raster order.
    """
    scale = np.asarray(scale, dtype=np.float64).reshape(2)
    hr_h = scaled_size(scale[0], cfg.lr_size)
    hr_w = scaled_size(scale[1], cfg.lr_size)
    if gt.height < hr_h or gt.width < hr_w:
        raise ValueError(
            f"ground truth {gt.height}x{gt.width} too small for target {hr_h}x{hr_w}"
        )
    hr = resample_bicubic(gt, hr_h, hr_w)
    if cfg.degradation == "bicubic":
        lr = resample_bicubic(hr, cfg.lr_size, cfg.lr_size)
    else:
        lr = resample_nearest(hr, cfg.lr_size, cfg.lr_size)

    cells = hr_h * hr_w
    q = min(cfg.queries_per_image, cells)
    if q == cells:
        idx = np.arange(cells)
    else:
        idx = np.sort(rng.choice(cells, size=q, replace=False))
    grid = make_coord_grid(hr_h, hr_w)
    ratio = np.array([cfg.lr_size / hr_h, cfg.lr_size / hr_w])
    queries = QueryBatch(coords=grid.coords[idx], scale_ratio=ratio)
    targets = hr.pixels.reshape(-1, 3)[idx]
    return lr, hr, queries, targets


def charbonnier(pred: Tensor, target: np.ndarray, delta: float) -> Tensor:
    """Smooth L1 surrogate: mean of sqrt((pred - target)^2 + delta^2)."""
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    diff = pred - Tensor(target)
    return ((diff * diff) + delta * delta).sqrt().mean()


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )


def adam_step(params: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Bias-corrected Adam update applied in fixed (dict) parameter order."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        if not p.requires_grad:
            continue
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * (g * g)
        m_hat = state.m[name] / (1.0 - beta1 ** t)
        v_hat = state.v[name] / (1.0 - beta2 ** t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass
class LossLogRow:
    iteration: int
    epoch: int
    scale_y: float
    scale_x: float
    loss: float


def write_loss_log(path, rows: list):
    with open(path, "w") as fh:
        fh.write("iteration,epoch,scale_y,scale_x,loss\n")
        for r in rows:
            fh.write(f"{r.iteration},{r.epoch},{r.scale_y!r},{r.scale_x!r},{r.loss!r}\n")


def train(cfg: TrainConfig, corpus: list, model: SuperResolver | None = None,
          variant: AblationVariant = FULL, checkpoint_path=None,
          progress=None):
    """Full training loop; returns (model, adam_state, loss_log).

    Per iteration: draw one isotropic scale for the batch, synthesize pairs,
    run encode -> tokens -> query, take the Charbonnier loss over all query
    rows, backprop, and apply Adam at the scheduled rate. A checkpoint is
    written after every epoch when a path is given.
    """
    if not corpus:
        raise ValueError("corpus must not be empty")
    min_side = scaled_size(cfg.scale_max, cfg.lr_size)
    for i, img in enumerate(corpus):
        if img.height < min_side or img.width < min_side:
            raise ValueError(
                f"corpus image {i} is {img.height}x{img.width}, "
                f"smaller than required {min_side}x{min_side}"
            )

    rng = np.random.Generator(np.random.Philox(cfg.seed))
    if model is None:
        model = SuperResolver(cfg.model, rng=rng)
    params = model.parameters()
    adam = AdamState.for_params(params)
    loss_log: list[LossLogRow] = []

    n = len(corpus)
    per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    iteration = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        rate = lr_at(epoch, cfg)
        for b in range(per_epoch):
            chosen = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            scale = rng.uniform(cfg.scale_min, cfg.scale_max)
            try:
                preds = []
                targets = []
                for img_idx in chosen:
                    lr_img, _hr, queries, target = synthesize_pair(
                        corpus[img_idx], (scale, scale), cfg, rng)
                    prep = model.prepare(lr_img, mode="train", rng=rng)
                    preds.append(model.query(prep, queries, variant=variant))
                    targets.append(target)
                pred = preds[0] if len(preds) == 1 else concat(preds, axis=0)
                loss = charbonnier(pred, np.concatenate(targets, axis=0), cfg.delta)
                model.zero_grad()
                loss.backward()
            except NonFiniteError as exc:
                raise TrainingDiverged(f"non-finite loss at iteration {iteration}") from exc
            adam_step(params, adam, rate)
            loss_log.append(LossLogRow(iteration, epoch, scale, scale, loss.item()))
            if progress is not None:
                progress(loss_log[-1])
            iteration += 1
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, model, cfg, epoch, adam, rng,
                            variant=variant.label)
    return model, adam, loss_log


# -- checkpoint ----------------------------------------------------------

_CKPT_MAGIC = b"ANYSRCK1"


def _rng_state_to_json(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return json.loads(json.dumps(state, default=lambda o: o.tolist()))


def _rng_from_json(state: dict) -> np.random.Generator:
    gen = np.random.Generator(np.random.Philox(0))
    gen.bit_generator.state = state
    return gen


def save_checkpoint(path, model: SuperResolver, cfg: TrainConfig, epoch: int,
                    adam: AdamState, rng: np.random.Generator, variant: str = "full"):
    """Little-endian float64 tensor blob behind a JSON header."""
    params = model.parameters()
    tensors = [(name, p.data) for name, p in params.items()]
    tensors += [(f"adam.m::{n}", adam.m[n]) for n in params]
    tensors += [(f"adam.v::{n}", adam.v[n]) for n in params]
    header = {
        "config": cfg.to_dict(),
        "epoch": epoch,
        "variant": variant,
        "adam_step": adam.step,
        "rng_state": _rng_state_to_json(rng),
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


@dataclass
class Checkpoint:
    model: SuperResolver
    config: TrainConfig
    epoch: int
    variant: str
    adam: AdamState
    rng: np.random.Generator


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _CKPT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (blob_len,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + blob_len].decode("utf-8"))
    cfg = TrainConfig.from_dict(header["config"])
    model = SuperResolver(cfg.model, seed=0)
    params = model.parameters()

    offset = 16 + blob_len
    loaded = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        loaded[entry["name"]] = arr.astype(np.float64)
        offset += count * 8

    adam = AdamState(m={}, v={}, step=header["adam_step"])
    for name, p in params.items():
        if name not in loaded:
            raise ValueError(f"checkpoint missing parameter {name!r}")
        if loaded[name].shape != p.data.shape:
            raise ValueError(
                f"checkpoint/architecture mismatch for {name!r}: "
                f"{loaded[name].shape} vs {p.data.shape}"
            )
        p.data = loaded[name].copy()
        adam.m[name] = loaded[f"adam.m::{name}"].copy()
        adam.v[name] = loaded[f"adam.v::{name}"].copy()
    extras = set(loaded) - set(params) \
        - {f"adam.m::{n}" for n in params} - {f"adam.v::{n}" for n in params}
    if extras:
        raise ValueError(f"checkpoint has unknown tensors: {sorted(extras)[:3]}")
    return Checkpoint(model=model, config=cfg, epoch=header["epoch"],
                      variant=header.get("variant", "full"), adam=adam,
                      rng=_rng_from_json(header["rng_state"]))
