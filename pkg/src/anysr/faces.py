"""Procedural face-like test images.

Renders aligned, softly anti-aliased cartoon faces with randomized colors,
geometry jitter, and skin texture. The patterns share a global layout (eyes,
nose, mouth in canonical positions), which is what face-specific priors in
the decoder can exploit, while edges and texture carry enough high-frequency
content to make super-resolution non-trivial.
"""

from __future__ import annotations

import numpy as np

from .imageops import Image


def _smoothstep(x: np.ndarray) -> np.ndarray:
    t = np.clip(x, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _ellipse_mask(yy, xx, cy, cx, ry, rx, feather):
    """1 inside the ellipse, 0 outside, smooth over ~feather (in radius units)."""
    d = np.sqrt(((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2)
    return _smoothstep((1.0 - d) / feather + 0.5)


def _blend(canvas, mask, color):
    return canvas * (1.0 - mask[..., None]) + mask[..., None] * color


def face_image(seed: int, size: int = 144) -> Image:
    """One synthetic face; same seed always renders the same image."""
    rng = np.random.Generator(np.random.Philox(seed))
    ys = np.linspace(0.0, 1.0, size)
    yy, xx = np.meshgrid(ys, ys, indexing="ij")
    feather = 1.2 / size

    # background: two-corner gradient in a muted random color
    bg_a = rng.uniform(0.15, 0.55, size=3)
    bg_b = rng.uniform(0.25, 0.75, size=3)
    canvas = bg_a + (bg_b - bg_a) * (0.6 * yy + 0.4 * xx)[..., None]

    # alignment jitter shared by all parts
    jy = rng.uniform(-0.02, 0.02)
    jx = rng.uniform(-0.02, 0.02)
    head_ry = rng.uniform(0.30, 0.36)
    head_rx = rng.uniform(0.24, 0.30)
    cy, cx = 0.52 + jy, 0.5 + jx

    skin = np.array([rng.uniform(0.55, 0.9), rng.uniform(0.42, 0.72), rng.uniform(0.32, 0.6)])
    skin = np.clip(skin * rng.uniform(0.85, 1.15), 0.0, 1.0)
    head = _ellipse_mask(yy, xx, cy, cx, head_ry, head_rx, feather * 3)
    canvas = _blend(canvas, head, skin)

    # hair cap
    hair = np.clip(skin * rng.uniform(0.15, 0.45), 0.0, 1.0)
    cap = _ellipse_mask(yy, xx, cy - 0.16, cx, head_ry * 0.72, head_rx * 1.02, feather * 3)
    cap *= _smoothstep((cy - 0.13 - yy) / 0.02)
    canvas = _blend(canvas, cap, hair)

    # eyes: sclera, iris, pupil, eyebrow for each side
    eye_dy = -0.055 + rng.uniform(-0.01, 0.01)
    eye_dx = 0.105 + rng.uniform(-0.012, 0.012)
    iris = rng.uniform(0.05, 0.45, size=3)
    for side in (-1.0, 1.0):
        ey, ex = cy + eye_dy, cx + side * eye_dx
        sclera = _ellipse_mask(yy, xx, ey, ex, 0.028, 0.05, feather)
        canvas = _blend(canvas, sclera, np.array([0.93, 0.93, 0.9]))
        canvas = _blend(canvas, _ellipse_mask(yy, xx, ey, ex, 0.02, 0.022, feather), iris)
        canvas = _blend(canvas, _ellipse_mask(yy, xx, ey, ex, 0.009, 0.01, feather),
                        np.array([0.03, 0.03, 0.04]))
        brow = _ellipse_mask(yy, xx, ey - 0.05, ex, 0.012, 0.055, feather)
        canvas = _blend(canvas, brow, hair * 0.8)

    # nose: slim vertical shadow plus tip highlight
    nose = _ellipse_mask(yy, xx, cy + 0.04, cx, 0.07, 0.018, feather * 2)
    canvas = _blend(canvas, nose * 0.5, skin * 0.82)
    tip = _ellipse_mask(yy, xx, cy + 0.1, cx, 0.016, 0.026, feather)
    canvas = _blend(canvas, tip * 0.6, np.clip(skin * 1.12, 0, 1))

    # mouth
    mouth_w = rng.uniform(0.06, 0.09)
    mouth = _ellipse_mask(yy, xx, cy + 0.17, cx, 0.02, mouth_w, feather)
    lip = np.array([rng.uniform(0.5, 0.75), rng.uniform(0.15, 0.3), rng.uniform(0.2, 0.32)])
    canvas = _blend(canvas, mouth, lip)
    gap = _ellipse_mask(yy, xx, cy + 0.17, cx, 0.004, mouth_w * 0.85, feather)
    canvas = _blend(canvas, gap, lip * 0.5)

    # skin texture: a couple of band-limited cosine fields, masked to the head
    freq = rng.uniform(14.0, 26.0, size=2)
    phase = rng.uniform(0.0, 2 * np.pi, size=3)
    texture = (np.cos(freq[0] * 2 * np.pi * yy + phase[0])
               * np.cos(freq[1] * 2 * np.pi * xx + phase[1])
               + 0.6 * np.cos((freq[0] + freq[1]) * np.pi * (yy + xx) + phase[2]))
    canvas += (0.02 * texture * head)[..., None]

    # fine deterministic speckle everywhere (sensor-like detail); kept small
    # so the unlearnable-noise floor does not dominate PSNR comparisons
    canvas += 0.006 * rng.standard_normal(canvas.shape)
    return Image(canvas)


def face_corpus(count: int, size: int = 144, seed: int = 0) -> list[Image]:
    """Deterministic list of synthetic faces; seeds are offset by the base seed."""
    return [face_image(seed * 100_003 + i, size) for i in range(count)]
