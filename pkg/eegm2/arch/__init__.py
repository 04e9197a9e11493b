"""
网络结构模块
"""

from .factory import (
    Checkpoint,
    analytic_param_count,
    block_param_count,
    build_variant,
    load_checkpoint,
    save_checkpoint,
)
from .model import EEGM2, Decoder, Encoder, Mediator, MultiScaleEmbed, branch_widths, make_block

__all__ = [
    "EEGM2", "Encoder", "Mediator", "Decoder", "MultiScaleEmbed", "branch_widths", "make_block",
    "build_variant", "analytic_param_count", "block_param_count",
    "Checkpoint", "save_checkpoint", "load_checkpoint",
]
