"""
有监督微调

预训练主干输出的解码特征经时间维均值/标准差池化后送入 MLP 分类头，
主干与分类头一起用交叉熵端到端训练（也可以冻结主干只训分类头）。
"""

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ..arch.factory import build_variant, load_checkpoint
from ..arch.model import EEGM2
from ..config import ArchConfig, FinetuneConfig, OptimConfig
from ..data.dataset import SignalBatch
from ..diffcore import ops
from ..diffcore.nn import MLP, Module
from ..diffcore.tensor import GradTape, Tensor
from ..exceptions import CheckpointError, ConfigError, DatasetError
from ..loss.functions import cross_entropy
from ..representation.metrics import ProbeReport
from .optim import AdamW
from .pretrain import iterate_batches

logger = logging.getLogger(__name__)

POOL_EPS = 1e-5


class FineTuneHead(Module):
    """时间维均值/标准差池化 + MLP"""

    def __init__(self, d_in: int, hidden: Sequence[int], n_classes: int,
                 rng: Optional[np.random.Generator] = None, dtype="float32"):
        super().__init__()
        self.mlp = MLP(2 * d_in, hidden, n_classes, rng=rng, dtype=dtype)

    def forward(self, features: Tensor) -> Tensor:
        mean = ops.tensor_mean(features, axis=-1)
        centered = features - ops.reshape(mean, mean.shape + (1,))
        std = ops.sqrt(ops.tensor_mean(centered * centered, axis=-1) + POOL_EPS)
        return self.mlp(ops.concat([mean, std], axis=-1))


class Classifier(Module):
    """主干 + 分类头"""

    def __init__(self, backbone: EEGM2, n_classes: int, hidden: Sequence[int] = (128, 64), seed: int = 0):
        super().__init__()
        self.backbone = backbone
        self.n_classes = n_classes
        self.head = FineTuneHead(backbone.config.stage_widths[0], hidden, n_classes,
                                 rng=np.random.default_rng(seed), dtype=backbone.dtype)

    def forward(self, x: Union[Tensor, np.ndarray]) -> Tensor:
        return self.head(self.backbone.forward_features(x))

    def predict_proba(self, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
        logits = np.concatenate([self(x[idx]).data for idx in iterate_batches(len(x), batch_size)])
        logits = logits.astype(np.float64)
        logits -= logits.max(axis=1, keepdims=True)
        proba = np.exp(logits)
        return proba / proba.sum(axis=1, keepdims=True)


def check_labels(train: SignalBatch, test: Optional[SignalBatch] = None) -> int:
    """训练标签必须覆盖 0..K-1，测试标签必须是其子集；返回 K"""
    y = train.require_labels()
    classes = np.unique(y)
    k = len(classes)
    if k < 2 or not np.array_equal(classes, np.arange(k)):
        raise DatasetError(f"训练标签应为 0..K-1 且 K >= 2，得到 {classes.tolist()}")
    if test is not None:
        extra = np.setdiff1d(test.require_labels(), classes)
        if len(extra):
            raise DatasetError(f"测试集出现训练集没有的类别: {extra.tolist()}")
    return k


@dataclass
class FinetuneRun:
    """单个种子的微调结果"""
    classifier: Classifier
    losses: list
    epoch_times: list


def train_classifier(classifier: Classifier, train: SignalBatch, config: FinetuneConfig,
                     seed: int = 0) -> FinetuneRun:
    """
    交叉熵训练分类器

    Args:
        classifier: 分类器，原地训练
        train: 有标签训练窗口
        config: 微调配置
        seed: 打乱种子

    Returns:
        FinetuneRun（逐 epoch 的平均损失与耗时）
    """
    if config.freeze_backbone:
        classifier.backbone.freeze()
    params = [(n, p) for n, p in classifier.named_parameters() if p.requires_grad]
    optimizer = AdamW(params, OptimConfig(init_lr=config.lr, weight_decay=config.weight_decay,
                                          schedule="constant"))
    x_all = train.x.astype(classifier.backbone.dtype)
    y_all = train.require_labels()
    losses, times = [], []
    for epoch in range(config.epochs):
        start = time.perf_counter()
        rng = np.random.default_rng([seed, epoch])
        total = 0.0
        for idx in iterate_batches(len(train), config.batch_size, rng):
            with GradTape() as tape:
                loss = cross_entropy(classifier(x_all[idx]), y_all[idx])
            optimizer.step(tape.gradient(loss, [p for _, p in params]), config.lr)
            total += loss.item() * len(idx)
        losses.append(total / len(train))
        times.append(time.perf_counter() - start)
        if not math.isfinite(losses[-1]):
            raise FloatingPointError(f"微调第 {epoch + 1} 个 epoch 损失非有限")
        logger.info("微调 seed=%d epoch %d: loss=%.4f (%.2fs)", seed, epoch + 1, losses[-1], times[-1])
    return FinetuneRun(classifier=classifier, losses=losses, epoch_times=times)


def _backbone_factory(checkpoint: Union[str, Path, EEGM2, None], arch: Optional[ArchConfig],
                      channels: int, dtype: str):
    """返回每个种子调用一次的主干构造函数"""
    if checkpoint is None:
        if arch is None:
            raise ConfigError("从零训练需要提供结构配置")
        if arch.in_channels != channels:
            raise CheckpointError(f"结构输入通道数 {arch.in_channels} 与数据通道数 {channels} 不一致")
        return lambda seed: build_variant(arch, seed=seed, dtype=dtype)
    if isinstance(checkpoint, EEGM2):
        if checkpoint.config.in_channels != channels:
            raise CheckpointError(
                f"模型输入通道数 {checkpoint.config.in_channels} 与数据通道数 {channels} 不一致"
            )
        state = checkpoint.state_dict()

        def clone(seed: int) -> EEGM2:
            model = EEGM2(checkpoint.config, seed=checkpoint.seed, dtype=dtype)
            model.load_state_dict(state)
            return model

        return clone
    path = Path(checkpoint)
    if not path.exists():
        raise FileNotFoundError(f"检查点不存在: {path}")
    return lambda seed: load_checkpoint(path, dtype=dtype, in_channels=channels).model


def finetune(checkpoint: Union[str, Path, EEGM2, None],
             train: SignalBatch,
             test: SignalBatch,
             config: Optional[FinetuneConfig] = None,
             arch: Optional[ArchConfig] = None,
             dtype: str = "float32",
             seeds: Optional[Sequence[int]] = None) -> Tuple[ProbeReport, Classifier]:
    """
    微调并在测试集上评估，按多个种子重复

    Args:
        checkpoint: 检查点路径或模型；None 表示随机初始化（从零训练）
        train: 有标签训练窗口
        test: 有标签测试窗口
        config: 微调配置
        arch: 从零训练时使用的结构配置
        dtype: 计算精度
        seeds: 种子列表，默认取 config.seeds

    Returns:
        (评估报告, 最后一个种子的分类器)
    """
    config = config or FinetuneConfig()
    n_classes = check_labels(train, test)
    make_backbone = _backbone_factory(checkpoint, arch, train.channels, dtype)
    mode = "scratch" if checkpoint is None else "fine"
    report = ProbeReport(mode=mode)
    classifier: Optional[Classifier] = None
    for seed in (seeds if seeds is not None else config.seeds):
        classifier = Classifier(make_backbone(seed), n_classes, config.hidden, seed=seed)
        run = train_classifier(classifier, train, config, seed)
        proba = classifier.predict_proba(test.x.astype(classifier.backbone.dtype), config.batch_size)
        metrics = report.add(seed, test.require_labels(), proba.argmax(axis=1), proba)
        metrics["epoch_seconds"] = float(np.mean(run.epoch_times))
        logger.info("%s seed=%d: balanced_acc=%.4f auroc=%.4f",
                    mode, seed, metrics["balanced_acc"], metrics["auroc"])
    if classifier is None:
        raise ConfigError("种子列表为空")
    return report, classifier
