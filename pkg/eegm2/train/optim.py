"""
AdamW 优化器与训练状态
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import OptimConfig
from ..diffcore.serialization import load_checkpoint_file, save_checkpoint_file
from ..diffcore.tensor import Parameter
from ..exceptions import CheckpointError, ShapeError

logger = logging.getLogger(__name__)

NamedParams = Sequence[Tuple[str, Parameter]]

STATE_FORMAT = "eegm2-train-state"


@dataclass
class TrainState:
    """优化器与训练进度状态"""
    step: int = 0
    epoch: int = 0
    seed: int = 0
    best_val_loss: float = math.inf
    epoch_times: List[float] = field(default_factory=list)
    skipped_steps: int = 0
    initial_loss: Optional[float] = None
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, params: NamedParams) -> None:
        """为尚无矩估计的参数创建零矩，并校验已有矩的形状"""
        for name, p in params:
            if name not in self.m:
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            elif self.m[name].shape != p.shape:
                raise ShapeError(f"参数 {name} 的矩形状 {self.m[name].shape} 与参数 {p.shape} 不一致")

    def save(self, path: Union[str, Path]) -> None:
        header = {
            "format": STATE_FORMAT,
            "step": self.step,
            "epoch": self.epoch,
            "seed": self.seed,
            "best_val_loss": None if math.isinf(self.best_val_loss) else self.best_val_loss,
            "epoch_times": self.epoch_times,
            "skipped_steps": self.skipped_steps,
            "initial_loss": self.initial_loss,
        }
        tensors: Dict[str, np.ndarray] = {}
        for name in self.m:
            tensors[f"m.{name}"] = self.m[name]
            tensors[f"v.{name}"] = self.v[name]
        save_checkpoint_file(path, header, tensors)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TrainState":
        header, tensors = load_checkpoint_file(path)
        if header.get("format") != STATE_FORMAT:
            raise CheckpointError(f"不是训练状态文件: {path}")
        best = header.get("best_val_loss")
        state = cls(
            step=int(header["step"]),
            epoch=int(header["epoch"]),
            seed=int(header.get("seed", 0)),
            best_val_loss=math.inf if best is None else float(best),
            epoch_times=list(header.get("epoch_times", [])),
            skipped_steps=int(header.get("skipped_steps", 0)),
            initial_loss=None if header.get("initial_loss") is None else float(header["initial_loss"]),
        )
        for key, value in tensors.items():
            kind, _, name = key.partition(".")
            (state.m if kind == "m" else state.v)[name] = value
        return state


def adamw_step(params: NamedParams,
               grads: Sequence[np.ndarray],
               state: TrainState,
               lr: float,
               config: OptimConfig) -> bool:
    """
    一步 AdamW 更新（解耦权重衰减，偏差校正的矩估计）

    任一梯度含 NaN/Inf 时跳过本步并记录警告，参数、矩与步数均不变。

    Args:
        params: (名称, 参数) 列表，原地更新
        grads: 与 params 对应的梯度
        state: 训练状态，原地更新
        lr: 学习率
        config: 优化器配置

    Returns:
        是否执行了更新
    """
    if lr <= 0:
        raise ValueError(f"学习率必须为正，得到 {lr}")
    if len(grads) != len(params):
        raise ShapeError(f"梯度个数 {len(grads)} 与参数个数 {len(params)} 不一致")
    for (name, p), g in zip(params, grads):
        if g.shape != p.shape:
            raise ShapeError(f"参数 {name} 的梯度形状 {g.shape} 与参数 {p.shape} 不一致")
        if not np.all(np.isfinite(g)):
            state.skipped_steps += 1
            logger.warning("第 %d 步参数 %s 的梯度出现非有限值，跳过本步更新", state.step, name)
            return False

    state.ensure(params)
    beta1, beta2 = config.betas
    t = state.step + 1
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t
    for (name, p), g in zip(params, grads):
        if not p.requires_grad:
            continue
        m, v = state.m[name], state.v[name]
        p.data *= 1.0 - lr * config.weight_decay
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + config.eps)
    state.step = t
    return True


class AdamW:
    """持有参数列表与训练状态的 AdamW"""

    def __init__(self, params: NamedParams, config: Optional[OptimConfig] = None,
                 state: Optional[TrainState] = None):
        self.params = list(params)
        self.config = config or OptimConfig()
        self.state = state or TrainState()
        self.state.ensure(self.params)

    def step(self, grads: Sequence[np.ndarray], lr: float) -> bool:
        return adamw_step(self.params, grads, self.state, lr, self.config)
