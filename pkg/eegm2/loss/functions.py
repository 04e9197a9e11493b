"""
重建损失与评估指标

reconstruction_loss = alpha · L1(时域) + beta · MSE(幅度谱)。
幅度谱由不归一化的 rFFT 得到，均值按频点数 floor(T/2)+1 计算。
"""

from typing import Optional, Union

import numpy as np

from ..config import LossConfig
from ..diffcore import ops
from ..diffcore.tensor import Tensor, as_tensor
from ..exceptions import ShapeError

SignalLike = Union[Tensor, np.ndarray]


def _pair(x: SignalLike, x_hat: SignalLike, what: str):
    x_hat_t = as_tensor(x_hat)
    x_t = as_tensor(x, x_hat_t)
    if x_t.shape != x_hat_t.shape:
        raise ShapeError(f"{what}: 形状不一致 {x_t.shape} vs {x_hat_t.shape}")
    return x_t, x_hat_t


def l1_temporal(x: SignalLike, x_hat: SignalLike) -> Tensor:
    """全部元素上的平均绝对误差"""
    x_t, x_hat_t = _pair(x, x_hat, "l1_temporal")
    return ops.tensor_mean(ops.absolute(x_hat_t - x_t))


def spectral_mse(x: SignalLike, x_hat: SignalLike) -> Tensor:
    """沿最后一维的 rFFT 幅度谱均方误差，对批、通道和频点取平均"""
    x_t, x_hat_t = _pair(x, x_hat, "spectral_mse")
    if x_t.shape[-1] < 2:
        raise ShapeError(f"spectral_mse 要求 T >= 2，得到 {x_t.shape[-1]}")
    diff = ops.rfft_mag(x_hat_t) - ops.rfft_mag(x_t)
    return ops.tensor_mean(diff * diff)


def reconstruction_loss(x: SignalLike, x_hat: SignalLike,
                        config: Optional[LossConfig] = None) -> Tensor:
    """
    时域-频域联合重建损失

    Args:
        x: 原始信号 [B, C, T]
        x_hat: 重建信号，形状与 x 相同
        config: 损失权重，默认 alpha = beta = 1

    Returns:
        标量损失张量
    """
    config = config or LossConfig()
    x_t, x_hat_t = _pair(x, x_hat, "reconstruction_loss")
    total: Optional[Tensor] = None
    if config.alpha > 0:
        total = l1_temporal(x_t, x_hat_t) * config.alpha
    if config.beta > 0:
        spectral = spectral_mse(x_t, x_hat_t) * config.beta
        total = spectral if total is None else total + spectral
    assert total is not None
    return total


def masked_reconstruction_loss(x: SignalLike, x_hat: SignalLike, mask: np.ndarray,
                               config: Optional[LossConfig] = None) -> Tensor:
    """
    只在有效位置上计算的重建损失

    mask 为沿时间轴的布尔数组（可广播到 x 的形状）。L1 项只在有效位置上取平均；
    频域项先把无效位置置零，再比较幅度谱。
    """
    config = config or LossConfig()
    x_t, x_hat_t = _pair(x, x_hat, "masked_reconstruction_loss")
    weights = np.broadcast_to(np.asarray(mask, dtype=bool), x_t.shape)
    n_valid = int(weights.sum())
    if n_valid == 0:
        raise ShapeError("掩码中没有有效位置")
    w = weights.astype(x_hat_t.dtype)
    total: Optional[Tensor] = None
    if config.alpha > 0:
        l1 = ops.tensor_sum(ops.absolute(x_hat_t - x_t) * w) * (config.alpha / n_valid)
        total = l1
    if config.beta > 0:
        spectral = spectral_mse(x_t * w, x_hat_t * w) * config.beta
        total = spectral if total is None else total + spectral
    assert total is not None
    return total


class ReconstructionLoss:
    """绑定权重配置的重建损失"""

    def __init__(self, config: Optional[LossConfig] = None):
        self.config = config or LossConfig()

    def __call__(self, x: SignalLike, x_hat: SignalLike,
                 mask: Optional[np.ndarray] = None) -> Tensor:
        if mask is None:
            return reconstruction_loss(x, x_hat, self.config)
        return masked_reconstruction_loss(x, x_hat, mask, self.config)


def acmse(x: SignalLike, x_hat: SignalLike) -> float:
    """
    逐通道均方误差的通道平均

    Args:
        x: 原始信号 [B, C, T]（或 [C, T]）
        x_hat: 重建信号

    Returns:
        各通道在批和时间上的 MSE 的无权平均
    """
    a = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    b = x_hat.data if isinstance(x_hat, Tensor) else np.asarray(x_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"acmse: 形状不一致 {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[None], b[None]
    if a.ndim != 3:
        raise ShapeError(f"acmse 需要 [B,C,T] 或 [C,T]，得到 {a.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    per_channel = (diff ** 2).mean(axis=(0, 2))
    return float(per_channel.mean())


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """
    多类交叉熵（批平均）

    Args:
        logits: 未归一化分数 [B, K]
        labels: 整数标签 [B]，取值 0..K-1

    Returns:
        标量损失张量
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} 与标签 {labels.shape} 不匹配")
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= logits.shape[1]:
        raise ShapeError(f"标签超出类别范围 [0, {logits.shape[1]})")
    picked = ops.getitem(ops.log_softmax(logits, axis=-1), (np.arange(len(labels)), labels))
    return -ops.tensor_mean(picked)
