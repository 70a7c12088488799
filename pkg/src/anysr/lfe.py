"""Per-pixel frequency token estimation.

A small convolutional encoder predicts a Gaussian (mu, logvar) over a latent
code for every LR pixel; a sampled (train) or mean (eval) code is decoded
into a token map that carries high-frequency texture information alongside
the content features.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .imageops import Image
from .encoder import image_to_tensor
from .nn import Conv3x3

LOGVAR_CLAMP = 10.0


class FrequencyEstimator:
    def __init__(self, rng: np.random.Generator, hidden: int = 32,
                 latent: int = 16, tokens: int = 32):
        self.latent = latent
        self.tokens = tokens
        self.conv1 = Conv3x3.create(rng, 3, hidden)
        self.conv2 = Conv3x3.create(rng, hidden, hidden)
        self.head_mu = Conv3x3.create(rng, hidden, latent)
        self.head_logvar = Conv3x3.create(rng, hidden, latent)
        # start at the variance clamp floor (sigma = e^-5): unit variance at
        # init floods the decoder with token noise during training that
        # eval-time means never reproduce; training can widen the variance
        # if useful
        self.head_logvar.bias.data[:] = -LOGVAR_CLAMP
        self.dec1 = Conv3x3.create(rng, latent, tokens)
        # small final-conv init makes the token contribution opt-in: the
        # decoder starts from (almost) the token-free model and grows the
        # path only where its gradient earns it
        self.dec2 = Conv3x3.create(rng, tokens, tokens, bias=False)
        self.dec2.weight.data *= 0.1

    def distribution(self, image: Image) -> tuple[Tensor, Tensor]:
        """Predict per-pixel Gaussian parameters (mu, logvar) from the LR image."""
        h = self.conv2(self.conv1(image_to_tensor(image)).relu()).relu()
        return self.head_mu(h), self.head_logvar(h)

    def sample(self, mu: Tensor, logvar: Tensor, mode: str,
               rng: np.random.Generator | None = None) -> Tensor:
        """Reparameterized draw in train mode; the mean in eval mode.

        logvar is clamped to [-10, 10] before exponentiation, bounding the
        stddev to [e^-5, e^5].
        """
        if mu.shape != logvar.shape:
            raise ValueError(f"mu/logvar shape mismatch: {mu.shape} vs {logvar.shape}")
        if mode == "eval":
            return mu
        if mode != "train":
            raise ValueError(f"unknown sampling mode {mode!r}")
        if rng is None:
            raise ValueError("train-mode sampling needs an explicit rng")
        eps = rng.standard_normal(mu.shape)
        sigma = (logvar.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP) * 0.5).exp()
        return mu + sigma * Tensor(eps)

    def decode(self, z: Tensor) -> Tensor:
        """Latent code (d_z, H, W) -> token map (d_t, H, W); final layer is bias-free."""
        return self.dec2(self.dec1(z).relu())

    def tokens_for(self, image: Image, mode: str,
                   rng: np.random.Generator | None = None) -> Tensor:
        mu, logvar = self.distribution(image)
        return self.decode(self.sample(mu, logvar, mode, rng))

    def params(self) -> dict:
        out = {}
        out.update(self.conv1.params("lfe.conv1"))
        out.update(self.conv2.params("lfe.conv2"))
        out.update(self.head_mu.params("lfe.mu"))
        out.update(self.head_logvar.params("lfe.logvar"))
        out.update(self.dec1.params("lfe.dec1"))
        out.update(self.dec2.params("lfe.dec2"))
        return out
