"""
损失函数模块
"""

from .functions import (
    ReconstructionLoss,
    acmse,
    cross_entropy,
    l1_temporal,
    masked_reconstruction_loss,
    reconstruction_loss,
    spectral_mse,
)

__all__ = [
    "l1_temporal", "spectral_mse", "reconstruction_loss", "masked_reconstruction_loss",
    "ReconstructionLoss", "acmse", "cross_entropy",
]
