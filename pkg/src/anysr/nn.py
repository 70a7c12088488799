"""Dense and 3x3 convolution layers on the autodiff engine, with seeded init."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


def kaiming_uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    """Affine map on row batches: (rows, in) -> (rows, out)."""

    def __init__(self, weight: Tensor, bias: Tensor | None):
        self.weight = weight
        self.bias = bias

    @classmethod
    def create(cls, rng, d_in: int, d_out: int, weight_scale: float | None = None,
               bias: bool = True):
        if weight_scale is None:
            w = kaiming_uniform(rng, d_in, (d_in, d_out))
        else:
            w = rng.uniform(-weight_scale, weight_scale, size=(d_in, d_out))
        weight = Tensor(w, requires_grad=True)
        b = Tensor(np.zeros(d_out), requires_grad=True) if bias else None
        return cls(weight, b)

    def __call__(self, x: Tensor) -> Tensor:
        y = x.matmul(self.weight)
        return y + self.bias if self.bias is not None else y

    def params(self, prefix: str) -> dict:
        out = {f"{prefix}.w": self.weight}
        if self.bias is not None:
            out[f"{prefix}.b"] = self.bias
        return out


class Conv3x3:
    """Zero-padded, stride-1 3x3 convolution on (C, H, W) maps.

    Realized as unfold3x3 followed by a matmul, so the kernel weight is
    stored as (C_out, 9*C_in) with neighbor-major column blocks.
    """

    def __init__(self, weight: Tensor, bias: Tensor | None):
        self.weight = weight
        self.bias = bias

    @classmethod
    def create(cls, rng, c_in: int, c_out: int, bias: bool = True):
        weight = Tensor(kaiming_uniform(rng, 9 * c_in, (c_out, 9 * c_in)), requires_grad=True)
        b = Tensor(np.zeros(c_out), requires_grad=True) if bias else None
        return cls(weight, b)

    def __call__(self, x: Tensor) -> Tensor:
        c, h, w = x.shape
        cols = x.unfold3x3().reshape(9 * c, h * w)
        out = self.weight.matmul(cols)
        if self.bias is not None:
            out = out + self.bias.reshape(-1, 1)
        return out.reshape(out.shape[0], h, w)

    def params(self, prefix: str) -> dict:
        out = {f"{prefix}.w": self.weight}
        if self.bias is not None:
            out[f"{prefix}.b"] = self.bias
        return out
