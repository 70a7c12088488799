"""Implicit image function: local ensemble over four latent codes, scale-ratio
conditioning, and sine modulation of hidden activations by encoded global
coordinates. Evaluating it on an output coordinate grid of any size is what
makes the model resolution- and scale-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ShapeError, Tensor, concat
from .imageops import CoordGrid, axis_centers
from .nn import Dense

PE_OCTAVES = 10


def positional_encode(coords: np.ndarray, octaves: int = PE_OCTAVES) -> np.ndarray:
    """Map (Q, 2) coordinates in [-1, 1] to (Q, 2 + 4*octaves) sinusoidal features.

    Layout: the raw coordinates, then per frequency 2^f (f = 0..octaves-1)
    the sine of both components followed by the cosine of both components.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    parts = [coords]
    for f in range(octaves):
        scaled = (2.0 ** f) * np.pi * coords
        parts.append(np.sin(scaled))
        parts.append(np.cos(scaled))
    return np.concatenate(parts, axis=1)


@dataclass
class QueryBatch:
    """Target coordinates plus the scale-ratio conditioning vector.

    coords: (Q, 2) normalized (y, x) positions in [-1, 1].
    scale_ratio: (1/r_y, 1/r_x); small values mean aggressive upscaling.
    """

    coords: np.ndarray
    scale_ratio: np.ndarray

    def __post_init__(self):
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=np.float64))
        self.scale_ratio = np.asarray(self.scale_ratio, dtype=np.float64).reshape(2)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ValueError(f"coords must be (Q, 2), got {self.coords.shape}")
        if self.coords.size and (np.abs(self.coords) > 1.0).any():
            raise ValueError("query coordinates must lie in [-1, 1]")
        if (self.scale_ratio <= 0).any():
            raise ValueError("scale_ratio components must be positive")

    def __len__(self):
        return self.coords.shape[0]


@dataclass
class EnsembleNeighbors:
    """Per query: flat indices, scaled relative coords, and blend weights of
    the four surrounding latent codes."""

    indices: np.ndarray     # (Q, 4) flat into H*W
    rel_coords: np.ndarray  # (Q, 4, 2), one cell pitch ~ magnitude 1
    weights: np.ndarray     # (Q, 4), sums to 1 per query


def _axis_neighbors(coord: np.ndarray, n: int):
    """Bracketing cell indices, bilinear fractions, and centers along one axis.

    Queries outside the outermost centers clamp to the border cell; when both
    brackets collapse onto the same cell the mass is split evenly, which is
    the degenerate-area-safe normalization of the opposite-rectangle weights.
    """
    u = (coord + 1.0) * (n / 2.0) - 0.5
    lo = np.floor(u).astype(np.intp)
    frac = u - lo
    lo_c = np.clip(lo, 0, n - 1)
    hi_c = np.clip(lo + 1, 0, n - 1)
    degenerate = lo_c == hi_c
    w_lo = np.where(degenerate, 0.5, 1.0 - frac)
    w_hi = np.where(degenerate, 0.5, frac)
    centers = axis_centers(n)
    return lo_c, hi_c, w_lo, w_hi, centers


def gather_neighbors(grid: CoordGrid, queries: QueryBatch) -> EnsembleNeighbors:
    """Locate the four latent codes around each query on the feature grid.

    Weights are the bilinear ones (normalized areas of the diagonally
    opposite rectangles); relative coordinates are scaled per axis by n/2 so
    one cell pitch maps to magnitude 1 regardless of grid size.
    """
    h, w = grid.source_height, grid.source_width
    ys, xs = queries.coords[:, 0], queries.coords[:, 1]
    y_lo, y_hi, wy_lo, wy_hi, y_centers = _axis_neighbors(ys, h)
    x_lo, x_hi, wx_lo, wx_hi, x_centers = _axis_neighbors(xs, w)

    q = len(queries)
    indices = np.empty((q, 4), dtype=np.intp)
    rel = np.empty((q, 4, 2))
    weights = np.empty((q, 4))
    for k, (iy, wy, ix, wx) in enumerate([
        (y_lo, wy_lo, x_lo, wx_lo),
        (y_lo, wy_lo, x_hi, wx_hi),
        (y_hi, wy_hi, x_lo, wx_lo),
        (y_hi, wy_hi, x_hi, wx_hi),
    ]):
        indices[:, k] = iy * w + ix
        rel[:, k, 0] = (ys - y_centers[iy]) * (h / 2.0)
        rel[:, k, 1] = (xs - x_centers[ix]) * (w / 2.0)
        weights[:, k] = wy * wx
    return EnsembleNeighbors(indices=indices, rel_coords=rel, weights=weights)


class ModulatedMLP:
    """ReLU MLP over [features, relative coord, scale ratio] whose hidden
    activations are gated by sine-encoded global coordinates.

    Block 0 consumes the raw input; block i >= 1 consumes [m_{i-1}, s_{i-1}]
    where m = s * sin(affine(g_s)). The final dense layer maps the last
    hidden state to RGB, so only the first depth-1 blocks carry modulation
    branches.
    """

    def __init__(self, rng: np.random.Generator, feature_len: int,
                 depth: int = 5, width: int = 256, encoding_len: int = 2 + 4 * PE_OCTAVES):
        self.feature_len = feature_len
        self.depth = depth
        self.width = width
        self.encoding_len = encoding_len
        self.content = [Dense.create(rng, feature_len + 4, width)]
        self.content += [Dense.create(rng, 2 * width, width) for _ in range(depth - 1)]
        # Sine-gate weights are bounded inversely to their input's frequency:
        # the octave-f encoding terms oscillate at 2^f pi, so uniform bounds
        # would give a randomly initialized model a Lipschitz constant in the
        # hundreds and break prediction continuity budgets. Scaling per
        # column keeps every gate's coordinate slope at O(1) while training
        # remains free to grow the useful frequencies.
        self.modulation = [
            self._frequency_scaled_gate(rng, encoding_len, width)
            for _ in range(depth - 1)
        ]
        self.output = Dense.create(rng, width, 3, weight_scale=1e-2)

    @staticmethod
    def _frequency_scaled_gate(rng: np.random.Generator, encoding_len: int,
                               width: int) -> Dense:
        octaves = (encoding_len - 2) // 4
        bounds = np.empty(encoding_len)
        bounds[:2] = 1.0
        for f in range(octaves):
            bounds[2 + 4 * f:2 + 4 * (f + 1)] = 1.0 / (2.0 ** f)
        bounds /= encoding_len
        weight = rng.uniform(-1.0, 1.0, size=(encoding_len, width)) * bounds[:, None]
        return Dense(Tensor(weight, requires_grad=True),
                     Tensor(np.zeros(width), requires_grad=True))

    def __call__(self, features: Tensor, rel: Tensor, ratio: Tensor, g_s: Tensor,
                 use_modulation: bool = True) -> Tensor:
        if features.shape[1] != self.feature_len:
            raise ShapeError(
                f"block 0: expected {self.feature_len} feature columns, got {features.shape[1]}"
            )
        x = concat([features, rel, ratio], axis=1)
        s = self.content[0](x).relu()
        for i in range(1, self.depth):
            if use_modulation:
                gate = self.modulation[i - 1](g_s).sin()
                m = s * gate
            else:
                m = s
            s = self.content[i](concat([m, s], axis=1)).relu()
        return self.output(s)

    def params(self, prefix: str = "decoder") -> dict:
        out = {}
        for i, layer in enumerate(self.content):
            out.update(layer.params(f"{prefix}.content{i}"))
        for i, layer in enumerate(self.modulation):
            out.update(layer.params(f"{prefix}.mod{i}"))
        out.update(self.output.params(f"{prefix}.out"))
        return out
