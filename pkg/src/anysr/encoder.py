"""Residual convolutional encoder producing one latent code per LR pixel."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .imageops import Image
from .nn import Conv3x3


def image_to_tensor(image: Image) -> Tensor:
    """(H, W, 3) raster -> constant (3, H, W) tensor."""
    return Tensor(image.pixels.transpose(2, 0, 1).copy())


class ResidualEncoder:
    """3x3 head, B residual blocks (conv-ReLU-conv + identity), 3x3 tail.

    Fully convolutional with zero padding, so the latent grid keeps the LR
    spatial size at any input resolution.
    """

    def __init__(self, rng: np.random.Generator, channels: int = 64, blocks: int = 8):
        self.channels = channels
        self.head = Conv3x3.create(rng, 3, channels)
        self.blocks = [
            (Conv3x3.create(rng, channels, channels), Conv3x3.create(rng, channels, channels))
            for _ in range(blocks)
        ]
        self.tail = Conv3x3.create(rng, channels, channels)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.head(x)
        for conv_a, conv_b in self.blocks:
            h = conv_b(conv_a(h).relu()) + h
        return self.tail(h)

    def encode(self, image: Image) -> Tensor:
        return self(image_to_tensor(image))

    def params(self) -> dict:
        out = self.head.params("encoder.head")
        for i, (conv_a, conv_b) in enumerate(self.blocks):
            out.update(conv_a.params(f"encoder.block{i}.a"))
            out.update(conv_b.params(f"encoder.block{i}.b"))
        out.update(self.tail.params("encoder.tail"))
        return out


def unfold3x3(feature_map: Tensor) -> Tensor:
    """Concatenate each latent code with its 3x3 neighbors: (C, H, W) -> (9C, H, W).

    Blocks are ordered top-left to bottom-right; the center block (index 4)
    reproduces the input, and neighbors outside the border contribute zeros.
    """
    return feature_map.unfold3x3()
