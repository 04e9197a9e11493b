"""
编码器取特征

通过前向钩子捕获编码阶段的输出，钩子只观察，不改变前向结果。
"""

import logging
from typing import List, Union

import numpy as np

from ..arch.model import EEGM2
from ..diffcore.tensor import Tensor
from ..exceptions import ShapeError
from .stats import extract_stats

logger = logging.getLogger(__name__)


def tap_encoder(model: EEGM2, x: Union[Tensor, np.ndarray], layer_id: str = "encoder.stage3") -> np.ndarray:
    """
    执行一次前向并捕获指定编码阶段的输出

    Args:
        model: 模型
        x: 输入 [B, C_in, T]
        layer_id: 取特征位置，见 model.tap_points

    Returns:
        特征 F [B, C', T']
    """
    if layer_id not in model.tap_points:
        raise ValueError(f"未知的取特征位置: {layer_id}，可选 {model.tap_points}")
    captured: List[np.ndarray] = []

    def hook(module, args, output) -> None:
        captured.append(np.array(output.data, copy=True))

    with model.get_submodule(layer_id).register_forward_hook(hook):
        model(x)
    if len(captured) != 1:
        raise RuntimeError(f"{layer_id} 在一次前向中被调用了 {len(captured)} 次")
    features = captured[0]
    if not np.all(np.isfinite(features)):
        raise FloatingPointError(f"{layer_id} 的激活含有非有限值")
    return features


def encode(model: EEGM2, x: np.ndarray, layer_id: str = "encoder.stage3",
           batch_size: int = 64) -> np.ndarray:
    """
    分批提取统计表征

    Returns:
        z [B, C', 9]
    """
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeError(f"encode 需要 [B, C, T]，得到 {x.shape}")
    chunks = [
        extract_stats(tap_encoder(model, x[start:start + batch_size].astype(model.dtype), layer_id))
        for start in range(0, len(x), batch_size)
    ]
    logger.debug("从 %s 提取了 %d 个样本的表征", layer_id, len(x))
    return np.concatenate(chunks)
