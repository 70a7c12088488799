"""Arbitrary-scale face super-resolution on a self-contained autodiff engine.

The model decodes RGB at any continuous coordinate from local latent codes,
a per-pixel frequency token, the scale ratio, and sine-modulated global
coordinates, so one set of weights super-resolves any input resolution at
any fractional scale.
"""

from .imageops import Image, load_image, save_image
from .model import AblationVariant, ModelConfig, SuperResolver
from .trainer import TrainConfig, load_checkpoint, save_checkpoint, train
from .evaluate import evaluate_checkpoint, infer, super_resolve

__all__ = [
    "AblationVariant",
    "Image",
    "ModelConfig",
    "SuperResolver",
    "TrainConfig",
    "evaluate_checkpoint",
    "infer",
    "load_checkpoint",
    "load_image",
    "save_checkpoint",
    "save_image",
    "super_resolve",
    "train",
]
