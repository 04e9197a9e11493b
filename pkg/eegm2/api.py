"""
EEGM2 高级API接口

提供简化的API接口，方便程序化调用和集成（HTTP 服务也通过它访问模型）。
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .arch.factory import build_variant, load_checkpoint
from .arch.model import EEGM2
from .config import ArchConfig, LossConfig, OptimConfig, VariantId
from .data.dataset import SignalBatch
from .exceptions import ShapeError
from .loss.functions import acmse
from .representation.tap import encode
from .train.pretrain import PretrainResult, Pretrainer, reconstruct

logger = logging.getLogger(__name__)


class EEGM2Toolkit:
    """
    EEGM2 工具包主类

    持有一个模型，提供：
    - 检查点载入或按预设构建
    - 重建与 ACMSE
    - 统计表征提取
    - 预训练
    """

    def __init__(self, model: Optional[EEGM2] = None):
        self.model = model
        self.header: Dict[str, Any] = {}
        self.checkpoint_path: Optional[Path] = None

    @property
    def is_loaded(self) -> bool:
        return self.model is not None

    def _require_model(self) -> EEGM2:
        if self.model is None:
            raise FileNotFoundError("尚未载入模型")
        return self.model

    def load_checkpoint(self, path: Union[str, Path], dtype: Optional[str] = None) -> EEGM2:
        """载入检查点"""
        checkpoint = load_checkpoint(path, dtype=dtype)
        self.model = checkpoint.model
        self.header = checkpoint.header
        self.checkpoint_path = Path(path)
        return self.model

    def build(self, preset: str = "light", in_channels: int = 16,
              variant: Union[str, VariantId] = VariantId.FULL,
              seed: int = 0, dtype: str = "float32") -> EEGM2:
        """按预设构建随机初始化的模型"""
        self.model = build_variant(ArchConfig.preset(preset, in_channels, variant), seed=seed, dtype=dtype)
        self.header = {}
        self.checkpoint_path = None
        return self.model

    def _as_batch(self, signal: Union[np.ndarray, list]) -> np.ndarray:
        model = self._require_model()
        x = np.asarray(signal, dtype=model.dtype)
        if x.ndim == 2:
            x = x[None]
        if x.ndim != 3:
            raise ShapeError(f"信号应为 [C, T] 或 [B, C, T]，得到 {x.shape}")
        if x.shape[1] != model.config.in_channels:
            raise ShapeError(f"信号通道数 {x.shape[1]} 与模型输入通道数 {model.config.in_channels} 不一致")
        if not np.all(np.isfinite(x)):
            raise ValueError("信号含有非有限值")
        return x

    def reconstruct(self, signal: Union[np.ndarray, list]) -> Dict[str, Any]:
        """
        重建信号

        Args:
            signal: [C, T] 或 [B, C, T]

        Returns:
            {"reconstruction": 与输入同形状的数组, "acmse": ACMSE}
        """
        x = self._as_batch(signal)
        x_hat = reconstruct(self._require_model(), x)
        result = x_hat[0] if np.ndim(signal) == 2 else x_hat
        return {"reconstruction": result, "acmse": acmse(x, x_hat)}

    def represent(self, signal: Union[np.ndarray, list], layer: str = "encoder.stage3") -> np.ndarray:
        """统计表征 z [B, C', 9]"""
        return encode(self._require_model(), self._as_batch(signal), layer)

    def pretrain(self, batch: SignalBatch,
                 optim: Optional[OptimConfig] = None,
                 loss: Optional[LossConfig] = None,
                 seed: int = 0,
                 output_dir: Optional[Union[str, Path]] = None) -> PretrainResult:
        """在窗口批上预训练当前模型"""
        model = self._require_model()
        loss = loss or LossConfig.for_variant(model.config.variant)
        return Pretrainer(model, optim, loss, seed=seed, output_dir=output_dir).fit(batch)

    def summary(self) -> Dict[str, Any]:
        """模型信息"""
        model = self._require_model()
        return {
            "variant": model.config.variant.value,
            "config": model.config.model_dump(mode="json"),
            "param_count": model.num_parameters(),
            "encoder_param_count": model.encoder_parameter_count(),
            "modules": model.summary(),
            "dtype": str(model.dtype),
            "checkpoint": str(self.checkpoint_path) if self.checkpoint_path else None,
            "metadata": self.header.get("metadata", {}),
        }


def load_toolkit(path: Union[str, Path], dtype: Optional[str] = None) -> EEGM2Toolkit:
    """
    便捷函数：从检查点创建工具包

    Args:
        path: 检查点路径
        dtype: 目标精度

    Returns:
        已载入模型的 EEGM2Toolkit
    """
    toolkit = EEGM2Toolkit()
    toolkit.load_checkpoint(path, dtype)
    return toolkit
