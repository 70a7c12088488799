"""The assembled super-resolver: encoder + frequency tokens + modulated decoder.

One latent grid is prepared per LR image; any number of query batches can
then be evaluated against it. The skip branch adds the bilinear sample of
the LR image at each query, so a zeroed decoder output layer reduces the
whole model to bilinear upsampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat
from .decoder import ModulatedMLP, QueryBatch, gather_neighbors, positional_encode
from .encoder import ResidualEncoder
from .imageops import Image, make_coord_grid
from .lfe import FrequencyEstimator


@dataclass(frozen=True)
class ModelConfig:
    feat_channels: int = 64
    res_blocks: int = 8
    freq_hidden: int = 32
    freq_latent: int = 16
    token_channels: int = 32
    mlp_blocks: int = 5
    mlp_width: int = 256

    @property
    def feature_len(self) -> int:
        return 9 * (self.token_channels + self.feat_channels)

    def to_dict(self) -> dict:
        return {
            "feat_channels": self.feat_channels,
            "res_blocks": self.res_blocks,
            "freq_hidden": self.freq_hidden,
            "freq_latent": self.freq_latent,
            "token_channels": self.token_channels,
            "mlp_blocks": self.mlp_blocks,
            "mlp_width": self.mlp_width,
        }


@dataclass(frozen=True)
class AblationVariant:
    """Inference/training-time switches for the ablation harness.

    -L replaces the token features with zeros, -G fixes every sine gate to 1,
    -S drops the skip branch. Widths never change, so parameter counts match
    the full model.
    """

    label: str = "full"
    use_tokens: bool = True
    use_modulation: bool = True
    use_skip: bool = True

    @classmethod
    def from_label(cls, label: str) -> "AblationVariant":
        table = {
            "full": cls("full"),
            "-L": cls("-L", use_tokens=False),
            "-G": cls("-G", use_modulation=False),
            "-S": cls("-S", use_skip=False),
        }
        if label not in table:
            raise ValueError(f"unknown variant {label!r}; expected one of {sorted(table)}")
        return table[label]


FULL = AblationVariant()


@dataclass
class PreparedInput:
    """Latent state for one LR image, reusable across query batches."""

    lr: Image
    feat_cols: Tensor    # (9C, H*W)
    token_cols: Tensor   # (9T, H*W)
    lr_cols: Tensor      # (3, H*W)
    height: int
    width: int


class SuperResolver:
    def __init__(self, config: ModelConfig = ModelConfig(), seed: int = 0,
                 rng: np.random.Generator | None = None):
        self.config = config
        if rng is None:
            rng = np.random.Generator(np.random.Philox(seed))
        self.encoder = ResidualEncoder(rng, config.feat_channels, config.res_blocks)
        self.lfe = FrequencyEstimator(rng, config.freq_hidden, config.freq_latent,
                                      config.token_channels)
        self.decoder = ModulatedMLP(rng, config.feature_len,
                                    config.mlp_blocks, config.mlp_width)

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        out.update(self.encoder.params())
        out.update(self.lfe.params())
        out.update(self.decoder.params())
        return out

    def zero_grad(self):
        for p in self.parameters().values():
            p.zero_grad()

    # -- forward ---------------------------------------------------------

    def prepare(self, lr: Image, mode: str = "eval",
                rng: np.random.Generator | None = None) -> PreparedInput:
        """Encode an LR image into unfolded content and token feature columns."""
        h, w = lr.height, lr.width
        feat = self.encoder.encode(lr).unfold3x3()
        tokens = self.lfe.tokens_for(lr, mode, rng).unfold3x3()
        lr_cols = Tensor(lr.pixels.reshape(h * w, 3).T.copy())
        return PreparedInput(
            lr=lr,
            feat_cols=feat.reshape(feat.shape[0], h * w),
            token_cols=tokens.reshape(tokens.shape[0], h * w),
            lr_cols=lr_cols,
            height=h,
            width=w,
        )

    def query(self, prep: PreparedInput, queries: QueryBatch,
              variant: AblationVariant = FULL, include_skip: bool = True) -> Tensor:
        """Predict (Q, 3) RGB rows for a query batch against prepared features.

        The four surrounding latent codes are decoded in one neighbor-major
        row batch and blended with bilinear weights; the skip term adds the
        bilinear LR sample at each query.
        """
        q = len(queries)
        if q == 0:
            return Tensor(np.zeros((0, 3)))
        neighbors = gather_neighbors(make_coord_grid(prep.height, prep.width), queries)
        encoded = positional_encode(queries.coords)

        # stack the four neighbor evaluations into one (4Q, ...) row batch
        idx = neighbors.indices.T.reshape(-1)
        rel = Tensor(neighbors.rel_coords.transpose(1, 0, 2).reshape(4 * q, 2))
        g_s = Tensor(np.tile(encoded, (4, 1)))
        ratio = Tensor(np.broadcast_to(queries.scale_ratio, (4 * q, 2)).copy())
        feat_rows = prep.feat_cols.take_columns(idx).T
        if variant.use_tokens:
            token_rows = prep.token_cols.take_columns(idx).T
        else:
            token_rows = Tensor(np.zeros((4 * q, prep.token_cols.shape[0])))
        enhanced = concat([token_rows, feat_rows], axis=1)
        rgb = self.decoder(enhanced, rel, ratio, g_s,
                           use_modulation=variant.use_modulation)

        # weighted blend: scale each neighbor row, then sum the four blocks
        weights = Tensor(neighbors.weights.T.reshape(4 * q, 1))
        blocks = (rgb * weights).reshape(4, q * 3)
        pred = Tensor(np.ones((1, 4))).matmul(blocks).reshape(q, 3)

        if include_skip and variant.use_skip:
            samples = prep.lr_cols.take_columns(idx).T
            skip_blocks = (samples * weights).reshape(4, q * 3)
            pred = pred + Tensor(np.ones((1, 4))).matmul(skip_blocks).reshape(q, 3)
        return pred

    def forward(self, lr: Image, queries: QueryBatch, mode: str = "eval",
                rng: np.random.Generator | None = None,
                variant: AblationVariant = FULL) -> Tensor:
        return self.query(self.prepare(lr, mode, rng), queries, variant)
