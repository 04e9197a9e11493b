"""
变体构建、参数统计与检查点
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from ..config import AMode, ArchConfig, VariantId
from ..diffcore.serialization import load_checkpoint_file, save_checkpoint_file
from ..diffcore.tensor import resolve_dtype
from ..exceptions import CheckpointError, ConfigError
from .model import EEGM2, branch_widths

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "eegm2-checkpoint"

PARAM_BUDGETS = {"full": 4_500_000, "light": 250_000}


def build_variant(config: ArchConfig, seed: int = 0,
                  dtype: Union[str, np.dtype] = "float32") -> EEGM2:
    """
    按变体组装网络并报告参数量

    Args:
        config: 结构配置，variant 决定嵌入、序列块类型与衰减参数化
        seed: 初始化种子
        dtype: 参数精度

    Returns:
        组装好的模型
    """
    try:
        variant = VariantId(config.variant)
    except ValueError as e:
        raise ConfigError(f"未知变体: {config.variant}") from e
    model = EEGM2(config, seed=seed, dtype=dtype)
    count = model.num_parameters()
    budget = PARAM_BUDGETS.get(config.param_budget_hint or "")
    if budget:
        logger.info("构建 EEGM2-%s: %d 个参数 (预算 %d, 偏差 %+.1f%%)",
                    variant.value, count, budget, 100.0 * (count - budget) / budget)
    else:
        logger.info("构建 EEGM2-%s: %d 个参数", variant.value, count)
    return model


def _linear(d_in: int, d_out: int, bias: bool = True) -> int:
    return d_in * d_out + (d_out if bias else 0)


def _conv(c_in: int, c_out: int, k: int) -> int:
    return c_in * c_out * k + c_out


def block_param_count(width: int, config: ArchConfig) -> int:
    """单个序列块的参数量解析式"""
    if config.uses_attention:
        return 2 * 2 * width + 4 * _linear(width, width) + _linear(width, 2 * width) + _linear(2 * width, width)
    ssd = config.ssd_config(width)
    d_inner, n = ssd.d_inner, ssd.d_state
    total = 2 * width + _linear(width, d_inner) + 2 * _linear(d_inner, n, bias=False)
    if ssd.a_mode == AMode.SCALAR_PER_HEAD:
        total += _linear(d_inner, ssd.n_heads) + ssd.n_heads
    else:
        total += _linear(d_inner, ssd.dt_rank, bias=False) + _linear(ssd.dt_rank, d_inner) + d_inner
    return total + _linear(d_inner, width)


def analytic_param_count(config: ArchConfig) -> int:
    """不实例化模型，直接由配置计算参数量"""
    c = config.in_channels
    d1, d2, d3 = config.stage_widths
    if config.uses_multiscale:
        embed = sum(_conv(c, w, k) for k, w in zip((1, 3, 7), branch_widths(d1)))
    else:
        embed = _conv(c, d1, 1)
    encoder = _linear(d1, d1) + block_param_count(d1, config) + _conv(d1, d2, 3) + _conv(d2, d3, 3)
    mediator = 2 * _linear(d3, d3) + block_param_count(d3, config)
    decoder = (block_param_count(d3, config) + _conv(d3 + d2, d2, 3)
               + block_param_count(d2, config) + _conv(d2 + d1, d1, 3))
    head = _conv(d1, c, 1)
    return embed + encoder + mediator + decoder + head


@dataclass
class Checkpoint:
    """载入的检查点"""
    model: EEGM2
    header: Dict[str, Any]
    extra: Dict[str, np.ndarray] = field(default_factory=dict)


def save_checkpoint(path: Union[str, Path], model: EEGM2,
                    metadata: Optional[Dict[str, Any]] = None,
                    extra_tensors: Optional[Dict[str, np.ndarray]] = None) -> Path:
    """
    保存检查点：结构配置头部 + 命名参数张量

    Args:
        path: 输出路径
        model: 模型
        metadata: 附加到头部的元数据（训练步数、数据集名等）
        extra_tensors: 额外张量（如分类头参数），名称不得与模型参数冲突
    """
    tensors = dict(model.state_dict())
    for name, value in (extra_tensors or {}).items():
        if name in tensors:
            raise CheckpointError(f"额外张量名与模型参数冲突: {name}")
        tensors[name] = value
    header = {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.model_dump(mode="json"),
        "seed": model.seed,
        "dtype": str(model.dtype),
        "param_count": model.num_parameters(),
        "metadata": metadata or {},
    }
    path = Path(path)
    save_checkpoint_file(path, header, tensors)
    logger.info("检查点已保存: %s (%d 个张量)", path, len(tensors))
    return path


def load_checkpoint(path: Union[str, Path],
                    dtype: Optional[Union[str, np.dtype]] = None,
                    in_channels: Optional[int] = None) -> Checkpoint:
    """
    载入检查点并重建模型

    Args:
        path: 检查点路径
        dtype: 目标精度，默认沿用检查点中的精度
        in_channels: 期望的输入通道数，不一致时报错

    Returns:
        Checkpoint（模型、头部、未被模型消费的额外张量）
    """
    header, tensors = load_checkpoint_file(path)
    if header.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"检查点格式不正确: {header.get('format')!r}")
    try:
        config = ArchConfig.model_validate(header["config"])
    except Exception as e:
        raise CheckpointError(f"检查点中的结构配置无效: {e}") from e
    if in_channels is not None and config.in_channels != in_channels:
        raise CheckpointError(
            f"检查点输入通道数 {config.in_channels} 与数据通道数 {in_channels} 不一致"
        )
    target = resolve_dtype(dtype or header.get("dtype", "float32"))
    model = EEGM2(config, seed=int(header.get("seed", 0)), dtype=target)
    own = {name for name, _ in model.named_parameters()}
    model.load_state_dict({k: v for k, v in tensors.items() if k in own})
    extra = {k: v for k, v in tensors.items() if k not in own}
    logger.info("载入检查点 %s: EEGM2-%s, %d 个参数", path, config.variant.value, model.num_parameters())
    return Checkpoint(model=model, header=header, extra=extra)
