"""Inference, corpus evaluation, and the ablation harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import no_grad
from .decoder import QueryBatch
from .imageops import (
    Image,
    make_coord_grid,
    resample_bicubic,
    resample_nearest,
    scaled_size,
)
from .metrics import psnr_y, ssim_y
from .model import AblationVariant, SuperResolver
from .trainer import Checkpoint, TrainConfig

QUERY_CHUNK = 4096


def super_resolve(model: SuperResolver, lr: Image, r_y: float, r_x: float | None = None,
                  variant: AblationVariant | None = None, clamp: bool = True) -> Image:
    """Evaluate the model on the full output grid of size round(r*H) x round(r*W).

    Runs in eval mode (token latents at their mean) in fixed-size query
    chunks, so memory stays bounded at any output resolution.
    """
    if r_x is None:
        r_x = r_y
    if r_y <= 0 or r_x <= 0:
        raise ValueError("scale factors must be positive")
    variant = variant or AblationVariant.from_label("full")
    out_h = scaled_size(r_y, lr.height)
    out_w = scaled_size(r_x, lr.width)
    ratio = np.array([lr.height / out_h, lr.width / out_w])
    coords = make_coord_grid(out_h, out_w).coords

    with no_grad():
        prep = model.prepare(lr, mode="eval")
        pieces = []
        for start in range(0, coords.shape[0], QUERY_CHUNK):
            batch = QueryBatch(coords[start:start + QUERY_CHUNK], ratio)
            pieces.append(model.query(prep, batch, variant=variant).data)
    raster = np.concatenate(pieces, axis=0).reshape(out_h, out_w, 3)
    if clamp:
        raster = np.clip(raster, 0.0, 1.0)
        return Image(raster)
    return raster


def infer(ckpt: Checkpoint, lr: Image, r_y: float, r_x: float | None = None,
          variant: AblationVariant | None = None, clamp: bool = True) -> Image:
    """Checkpoint-level inference; defaults to the variant the model was trained as."""
    if variant is None:
        variant = AblationVariant.from_label(ckpt.variant)
    return super_resolve(ckpt.model, lr, r_y, r_x, variant, clamp)


@dataclass
class EvalRow:
    image: str
    scale: float
    psnr_db: float
    ssim: float


@dataclass
class EvalReport:
    variant: str
    rows: list

    def scales(self) -> list:
        seen = []
        for r in self.rows:
            if r.scale not in seen:
                seen.append(r.scale)
        return seen

    def mean_psnr(self, scale: float) -> float:
        vals = [r.psnr_db for r in self.rows if r.scale == scale]
        return float(np.mean(vals))

    def mean_ssim(self, scale: float) -> float:
        vals = [r.ssim for r in self.rows if r.scale == scale]
        return float(np.mean(vals))


def synthesize_eval_pair(gt: Image, scale: float, cfg: TrainConfig,
                         lr_size: int | None = None):
    """Fixed-LR evaluation protocol: hr from the ground truth at
    round(scale * lr_size), lr degraded from hr, mirroring training."""
    size = lr_size or cfg.lr_size
    hr_h = scaled_size(scale, size)
    hr = resample_bicubic(gt, hr_h, hr_h)
    if cfg.degradation == "nearest":
        lr = resample_nearest(hr, size, size)
    else:
        lr = resample_bicubic(hr, size, size)
    return lr, hr


def evaluate_checkpoint(ckpt: Checkpoint, corpus: list, scales: list,
                        lr_size: int | None = None,
                        variant: AblationVariant | None = None) -> EvalReport:
    """PSNR/SSIM-on-Y rows for every (image, scale); corpus is [(name, Image)]."""
    if variant is None:
        variant = AblationVariant.from_label(ckpt.variant)
    rows = []
    for scale in scales:
        for name, gt in corpus:
            lr, hr = synthesize_eval_pair(gt, scale, ckpt.config, lr_size)
            sr = super_resolve(ckpt.model, lr, scale, variant=variant)
            rows.append(EvalRow(name, scale, psnr_y(sr, hr), ssim_y(sr, hr)))
    return EvalReport(variant=variant.label, rows=rows)


def baseline_report(corpus: list, scales: list, cfg: TrainConfig,
                    lr_size: int | None = None, method: str = "bicubic") -> EvalReport:
    """Reference upsampler scores under the identical evaluation protocol."""
    resample = resample_bicubic if method == "bicubic" else resample_nearest
    rows = []
    for scale in scales:
        for name, gt in corpus:
            lr, hr = synthesize_eval_pair(gt, scale, cfg, lr_size)
            up = resample(lr, hr.height, hr.width)
            rows.append(EvalRow(name, scale, psnr_y(up, hr), ssim_y(up, hr)))
    return EvalReport(variant=method, rows=rows)


def write_report_csv(path, reports: list):
    """CSV rows per image plus one mean row per (variant, scale)."""
    with open(path, "w") as fh:
        multi = len(reports) > 1
        fh.write("variant,image,scale,psnr_db,ssim\n" if multi
                 else "image,scale,psnr_db,ssim\n")
        for report in reports:
            prefix = f"{report.variant}," if multi else ""
            for r in report.rows:
                fh.write(f"{prefix}{r.image},{r.scale:g},{r.psnr_db:.6f},{r.ssim:.8f}\n")
            for scale in report.scales():
                fh.write(f"{prefix}mean,{scale:g},{report.mean_psnr(scale):.6f},"
                         f"{report.mean_ssim(scale):.8f}\n")


def ablate(ckpts: dict, corpus: list, scales: list,
           diffmap_dir=None, lr_size: int | None = None) -> dict:
    """Evaluate one retrained checkpoint per variant label.

    Returns {label: EvalReport}; when diffmap_dir is given, also renders
    |SR - bicubic upsample| maps for every (image, variant, scale).
    """
    missing = [label for label, ck in ckpts.items() if ck is None]
    if missing:
        raise ValueError(f"missing checkpoints for variants: {missing}")
    reports = {}
    for label, ckpt in ckpts.items():
        variant = AblationVariant.from_label(label)
        reports[label] = evaluate_checkpoint(ckpt, corpus, scales, lr_size, variant)
        if diffmap_dir is not None:
            from .reporting import save_difference_map

            for scale in scales:
                for name, gt in corpus:
                    lr, hr = synthesize_eval_pair(gt, scale, ckpt.config, lr_size)
                    sr = super_resolve(ckpt.model, lr, scale, variant=variant)
                    up = resample_bicubic(lr, hr.height, hr.width)
                    diff = np.abs(sr.pixels - up.pixels).mean(axis=2)
                    safe = label.replace("-", "minus_") if label.startswith("-") else label
                    out = f"{diffmap_dir}/{name}_{safe}_x{scale:g}.png"
                    save_difference_map(diff, out, f"{label} x{scale:g} {name}")
    return reports
