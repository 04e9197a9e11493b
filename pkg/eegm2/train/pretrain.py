"""
自监督预训练

按批最小化重建损失，每个 epoch 结束后在留出集上计算验证损失与 ACMSE，
记录耗时并写出指标日志、损失曲线和检查点。
"""

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..arch.factory import save_checkpoint
from ..arch.model import EEGM2
from ..config import LossConfig, OptimConfig
from ..data.dataset import SignalBatch, record_holdout
from ..diffcore.tensor import GradTape
from ..exceptions import DivergenceError, ShapeError
from ..loss.functions import ReconstructionLoss, acmse
from .optim import AdamW, TrainState
from .schedule import learning_rate

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.jsonl"
LOSS_CURVE_FILE = "loss_curve.csv"


def state_path_for(checkpoint_path: Union[str, Path]) -> Path:
    """训练状态文件与检查点放在同一目录"""
    checkpoint_path = Path(checkpoint_path)
    return checkpoint_path.with_name(checkpoint_path.stem + ".state")


def iterate_batches(n: int, batch_size: int, rng: Optional[np.random.Generator] = None):
    """按（可选打乱的）顺序产生批下标"""
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def reconstruct(model: EEGM2, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """分批重建，不记录梯度"""
    outputs = [model(x[idx]).data for idx in iterate_batches(len(x), batch_size)]
    return np.concatenate(outputs) if outputs else np.zeros_like(x)


def evaluate_reconstruction(model: EEGM2, batch: SignalBatch,
                            loss_config: Optional[LossConfig] = None,
                            batch_size: int = 64) -> Dict[str, float]:
    """
    计算重建损失与 ACMSE，不修改任何参数

    Returns:
        {"loss": 按样本数加权的平均损失, "acmse": ACMSE}
    """
    if len(batch) == 0:
        return {"loss": math.nan, "acmse": math.nan}
    criterion = ReconstructionLoss(loss_config)
    total, recon = 0.0, []
    for idx in iterate_batches(len(batch), batch_size):
        x = batch.x[idx].astype(model.dtype)
        padded, out, mask = model.forward_padded(x)
        loss = criterion(padded, out, None if mask.all() else mask)
        total += loss.item() * len(idx)
        recon.append(out.data[..., :batch.length])
    return {"loss": total / len(batch), "acmse": acmse(batch.x, np.concatenate(recon))}


def mean_predictor_acmse(train: SignalBatch, test: SignalBatch) -> float:
    """用训练集逐通道均值作为预测的 ACMSE 基线"""
    means = train.x.astype(np.float64).mean(axis=(0, 2))
    prediction = np.broadcast_to(means[None, :, None], test.x.shape)
    return acmse(test.x, prediction)


@dataclass
class PretrainResult:
    """预训练结果"""
    history: List[Dict[str, Any]] = field(default_factory=list)
    state: TrainState = field(default_factory=TrainState)
    checkpoint: Optional[Path] = None

    @property
    def loss_curve(self) -> pd.DataFrame:
        return pd.DataFrame(self.history)

    @property
    def mean_epoch_seconds(self) -> float:
        times = self.state.epoch_times
        return float(np.mean(times)) if times else math.nan


class Pretrainer:
    """
    预训练循环

    Args:
        model: 待训练模型
        optim: 优化器与调度配置
        loss: 损失权重
        seed: 打乱与留出划分的随机种子
        output_dir: 指标日志与损失曲线的输出目录，None 表示不写文件
        state: 续训时载入的训练状态
    """

    def __init__(self,
                 model: EEGM2,
                 optim: Optional[OptimConfig] = None,
                 loss: Optional[LossConfig] = None,
                 seed: int = 0,
                 output_dir: Optional[Union[str, Path]] = None,
                 state: Optional[TrainState] = None):
        self.model = model
        self.optim_config = optim or OptimConfig()
        self.loss_config = loss or LossConfig()
        self.criterion = ReconstructionLoss(self.loss_config)
        self.seed = seed
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.params = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
        self.optimizer = AdamW(self.params, self.optim_config, state or TrainState(seed=seed))

    @property
    def state(self) -> TrainState:
        return self.optimizer.state

    def _train_step(self, x: np.ndarray, lr: float) -> float:
        with GradTape() as tape:
            padded, out, mask = self.model.forward_padded(x)
            loss = self.criterion(padded, out, None if mask.all() else mask)
        grads = tape.gradient(loss, [p for _, p in self.params])
        self.optimizer.step(grads, lr)
        return loss.item()

    def _log_epoch(self, record: Dict[str, Any]) -> None:
        logger.info(
            "epoch %d: train_loss=%.6f val_loss=%.6f acmse=%.6f lr=%.3e (%.2fs)",
            record["epoch"], record["train_loss"], record["val_loss"], record["acmse"],
            record["lr"], record["seconds"],
        )
        if self.output_dir is None:
            return
        self.output_dir.mkdir(parents=True, exist_ok=True)
        with open(self.output_dir / METRICS_FILE, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")

    def fit(self,
            train: SignalBatch,
            val: Optional[SignalBatch] = None,
            checkpoint_path: Optional[Union[str, Path]] = None,
            metadata: Optional[Dict[str, Any]] = None) -> PretrainResult:
        """
        训练到配置的 epoch 数

        已有训练状态时从 state.epoch 继续，步数单调递增。

        Args:
            train: 训练窗口（标签被忽略）
            val: 验证窗口，None 时按记录从 train 中留出 val_frac
            checkpoint_path: 每个 epoch 结束后写入检查点和训练状态
            metadata: 写入检查点头部的附加信息

        Returns:
            PretrainResult
        """
        if train.channels != self.model.config.in_channels:
            raise ShapeError(
                f"数据通道数 {train.channels} 与模型输入通道数 {self.model.config.in_channels} 不一致"
            )
        if val is None:
            train, val = record_holdout(train, self.optim_config.val_frac, self.seed)
        if len(train) == 0:
            raise ShapeError("训练集为空")

        config = self.optim_config
        steps_per_epoch = math.ceil(len(train) / config.batch_size)
        total_steps = config.epochs * steps_per_epoch
        x_all = train.x.astype(self.model.dtype)
        result = PretrainResult(state=self.state)
        if self.state.epoch > 0:
            logger.info("从第 %d 个 epoch（第 %d 步）继续训练", self.state.epoch, self.state.step)
        elif self.output_dir is not None:
            (self.output_dir / METRICS_FILE).unlink(missing_ok=True)

        for epoch in range(self.state.epoch, config.epochs):
            start = time.perf_counter()
            rng = np.random.default_rng([self.seed, epoch])
            losses, sizes = [], []
            lr = learning_rate(self.state.step, total_steps, config)
            for idx in iterate_batches(len(train), config.batch_size, rng):
                lr = learning_rate(self.state.step, total_steps, config)
                value = self._train_step(x_all[idx], lr)
                if not math.isfinite(value):
                    raise DivergenceError(f"第 {epoch + 1} 个 epoch 出现非有限损失 {value}")
                initial_loss = self.state.initial_loss
                if initial_loss is None:
                    self.state.initial_loss = value
                elif value > config.divergence_factor * initial_loss:
                    raise DivergenceError(
                        f"训练发散: 损失 {value:.4g} 超过初始损失 {initial_loss:.4g} 的 "
                        f"{config.divergence_factor:g} 倍 (epoch {epoch + 1}, step {self.state.step})"
                    )
                losses.append(value)
                sizes.append(len(idx))
            seconds = time.perf_counter() - start

            metrics = evaluate_reconstruction(self.model, val, self.loss_config, config.batch_size)
            self.state.epoch = epoch + 1
            self.state.epoch_times.append(seconds)
            if metrics["loss"] < self.state.best_val_loss:
                self.state.best_val_loss = metrics["loss"]
            record = {
                "epoch": epoch + 1,
                "step": self.state.step,
                "train_loss": float(np.average(losses, weights=sizes)),
                "val_loss": metrics["loss"],
                "acmse": metrics["acmse"],
                "seconds": seconds,
                "lr": lr,
            }
            result.history.append(record)
            self._log_epoch(record)
            if checkpoint_path is not None:
                result.checkpoint = self.save(checkpoint_path, metadata)

        if self.output_dir is not None and result.history:
            curve = self.output_dir / LOSS_CURVE_FILE
            frame = result.loss_curve
            if curve.exists() and self.state.epoch > len(result.history):
                frame = pd.concat([pd.read_csv(curve), frame], ignore_index=True)
            frame.to_csv(curve, index=False)
        if self.state.skipped_steps:
            logger.warning("训练中共跳过 %d 步更新", self.state.skipped_steps)
        return result

    def save(self, checkpoint_path: Union[str, Path],
             metadata: Optional[Dict[str, Any]] = None) -> Path:
        meta = {"step": self.state.step, "epoch": self.state.epoch, **(metadata or {})}
        path = save_checkpoint(checkpoint_path, self.model, meta)
        self.state.save(state_path_for(path))
        return path


def pretrain(model: EEGM2,
             dataset: SignalBatch,
             optim: Optional[OptimConfig] = None,
             loss: Optional[LossConfig] = None,
             seed: int = 0,
             output_dir: Optional[Union[str, Path]] = None,
             checkpoint_path: Optional[Union[str, Path]] = None,
             resume: bool = False) -> PretrainResult:
    """
    预训练的函数式入口

    Args:
        model: 模型（续训时应已载入检查点参数）
        dataset: 无标签窗口批
        optim: 优化器配置
        loss: 损失配置
        seed: 随机种子
        output_dir: 输出目录
        checkpoint_path: 检查点路径
        resume: 是否从 checkpoint_path 旁的训练状态继续

    Returns:
        PretrainResult
    """
    state = None
    if resume:
        if checkpoint_path is None:
            raise ValueError("续训需要指定检查点路径")
        state_file = state_path_for(checkpoint_path)
        if not state_file.exists():
            raise FileNotFoundError(f"训练状态文件不存在: {state_file}")
        state = TrainState.load(state_file)
    trainer = Pretrainer(model, optim, loss, seed=seed, output_dir=output_dir, state=state)
    return trainer.fit(dataset, checkpoint_path=checkpoint_path)
