"""
统计表征

对隐藏激活沿时间轴取九个统计量：最小值、最大值、均值、标准差和五个分位数。
"""

from typing import Union

import numpy as np

from ..diffcore.tensor import Tensor
from ..exceptions import ShapeError

STAT_NAMES = ("min", "max", "mean", "std", "q05", "q25", "q50", "q75", "q95")
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def extract_stats(features: Union[Tensor, np.ndarray]) -> np.ndarray:
    """
    提取逐通道统计表征

    分位数在次序统计量之间线性插值（位置 p·(n-1)），标准差为总体标准差。

    Args:
        features: 激活 [B, C, T']

    Returns:
        z [B, C, 9]，float64
    """
    f = features.data if isinstance(features, Tensor) else np.asarray(features)
    f = f.astype(np.float64)
    if f.ndim != 3:
        raise ShapeError(f"extract_stats 需要 [B, C, T']，得到 {f.shape}")
    if f.shape[-1] < 1:
        raise ShapeError("时间轴为空，无法提取统计量")
    q = np.quantile(f, QUANTILES, axis=-1, method="linear")  # [5, B, C]
    return np.concatenate([
        f.min(axis=-1)[..., None],
        f.max(axis=-1)[..., None],
        f.mean(axis=-1)[..., None],
        f.std(axis=-1)[..., None],
        np.moveaxis(q, 0, -1),
    ], axis=-1)


def flatten_stats(z: np.ndarray) -> np.ndarray:
    """[B, C, 9] → [B, 9·C]"""
    z = np.asarray(z)
    return z.reshape(z.shape[0], -1)
