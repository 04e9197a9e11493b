"""
EEGM2 工具包

多通道生理信号的自监督重建与表征学习：Mamba-2 风格的 U 形编码器-解码器、
时域-频域联合重建损失、统计表征探针与序列长度扩展基准，全部建立在一个
基于 numpy 的小型可微数组引擎之上。

主要功能：
- 可微数组引擎（diffcore）与分块状态空间扫描（ssd）
- EEGM2 网络及其消融变体（arch）
- 自监督预训练与微调（train）
- 表征提取、线性/非线性探针（representation）
- 合成数据集与被试级划分（data）
- 内存与速度基准（bench）
"""

__version__ = "0.1.0"
__author__ = "EEGM2 Toolkit"

from .api import EEGM2Toolkit, load_toolkit
from .arch import EEGM2, build_variant, load_checkpoint, save_checkpoint
from .config import ArchConfig, LossConfig, OptimConfig, RunConfig, VariantId
from .exceptions import EEGM2Error
from .visualization.plotter import SignalPlotter

__all__ = [
    "EEGM2Toolkit",
    "load_toolkit",
    "EEGM2",
    "build_variant",
    "load_checkpoint",
    "save_checkpoint",
    "ArchConfig",
    "LossConfig",
    "OptimConfig",
    "RunConfig",
    "VariantId",
    "EEGM2Error",
    "SignalPlotter",
]
