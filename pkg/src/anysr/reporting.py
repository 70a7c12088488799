"""Figure rendering for the report paths: loss curves, PSNR-vs-scale charts,
ablation bars, and difference maps. All figures are written to files; the
Agg backend keeps this headless-safe."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_loss_curve(loss_log: list, path):
    """Per-iteration training loss on a log scale."""
    iterations = [r.iteration for r in loss_log]
    losses = [r.loss for r in loss_log]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(iterations, losses, lw=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("charbonnier loss")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_psnr_figure(reports: dict, path):
    """Mean PSNR against scale, one line per labelled report."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, report in reports.items():
        scales = sorted(report.scales())
        means = [report.mean_psnr(s) for s in scales]
        ax.plot(scales, means, marker="o", label=label)
    ax.set_xlabel("upsampling scale")
    ax.set_ylabel("PSNR on Y (dB)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_ablation_figure(reports: dict, path):
    """Grouped bars: mean PSNR per variant at each scale."""
    labels = list(reports)
    scales = sorted({s for rep in reports.values() for s in rep.scales()})
    width = 0.8 / max(len(labels), 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(scales))
    for i, label in enumerate(labels):
        means = [reports[label].mean_psnr(s) for s in scales]
        ax.bar(x + i * width, means, width, label=label)
    ax.set_xticks(x + width * (len(labels) - 1) / 2)
    ax.set_xticklabels([f"x{s:g}" for s in scales])
    ax.set_ylabel("PSNR on Y (dB)")
    lo = min(reports[l].mean_psnr(s) for l in labels for s in scales)
    hi = max(reports[l].mean_psnr(s) for l in labels for s in scales)
    pad = max(0.2, (hi - lo) * 0.5)
    ax.set_ylim(lo - pad, hi + pad)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_difference_map(diff: np.ndarray, path, title: str = ""):
    """Heatmap of |SR - bicubic| with a colorbar."""
    fig, ax = plt.subplots(figsize=(4.2, 4))
    im = ax.imshow(diff, cmap="magma", vmin=0.0)
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title, fontsize=9)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
