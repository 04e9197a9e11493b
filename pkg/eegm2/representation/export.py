"""
表征导出
"""

import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..exceptions import ShapeError
from .stats import STAT_NAMES

logger = logging.getLogger(__name__)


def representations_frame(z: np.ndarray,
                          ids: Optional[Sequence[str]] = None,
                          labels: Optional[Sequence[int]] = None) -> pd.DataFrame:
    """每个样本一行：id、label 和 9·C 个特征列（ch{c}_{统计量}）"""
    z = np.asarray(z)
    if z.ndim != 3 or z.shape[-1] != len(STAT_NAMES):
        raise ShapeError(f"表征应为 [B, C, 9]，得到 {z.shape}")
    n, channels, _ = z.shape
    columns = [f"ch{c}_{s}" for c in range(channels) for s in STAT_NAMES]
    frame = pd.DataFrame(z.reshape(n, -1), columns=columns)
    frame.insert(0, "label", list(labels) if labels is not None else [None] * n)
    frame.insert(0, "id", list(ids) if ids is not None else [str(i) for i in range(n)])
    return frame


def export_representations(z: np.ndarray,
                           path: Union[str, Path],
                           ids: Optional[Sequence[str]] = None,
                           labels: Optional[Sequence[int]] = None) -> Path:
    """
    写出逗号分隔的表征表

    Args:
        z: 表征 [B, C, 9]
        path: 输出 CSV 路径
        ids: 样本标识，默认用行号
        labels: 样本标签

    Returns:
        输出路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    representations_frame(z, ids, labels).to_csv(path, index=False)
    logger.info("已导出 %d 个样本的表征: %s", len(z), path)
    return path
