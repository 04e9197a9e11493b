"""
序列块

Mamba2Block：LayerNorm → 输入投影 → SiLU → 选择性扫描 → 输出投影，带残差；
输入输出均为 [B, C, T]，内部转置为 [B, T, C] 处理。
AttentionBlock：前置归一化的多头自注意力 + 前馈网络，无位置编码（S5 变体）。
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..config import AMode, SSDConfig
from ..diffcore import ops
from ..diffcore.memory import tracker
from ..diffcore.nn import MLP, LayerNorm, Linear, Module
from ..diffcore.tensor import Parameter, Tensor, resolve_dtype
from ..exceptions import ShapeError
from .scan import scan_chunked_log

logger = logging.getLogger(__name__)


def inverse_softplus(y: np.ndarray) -> np.ndarray:
    """softplus 的反函数 log(exp(y) - 1)"""
    return y + np.log(-np.expm1(-y))


@dataclass
class Discretized:
    """离散化结果，各张量的时间维与输入一致"""
    log_a: Tensor
    b: Tensor
    c: Tensor
    dt: Tensor

    @property
    def a(self) -> Tensor:
        return ops.exp(self.log_a)


def decay_factor(dt: Tensor, a_log: Tensor) -> Tensor:
    """A_t = exp(-dt · exp(a_log))"""
    return ops.exp(ops.neg(dt * ops.exp(a_log)))


def discretize(u: Tensor, block: "Mamba2Block") -> Discretized:
    """
    由激活后的输入生成 A_t、B_t、C_t 与步长

    Args:
        u: 块内特征 [B, T, d_inner]
        block: 提供投影参数的块

    Returns:
        Discretized，其中 dt 为 [B, T, H]（每头）或 [B, T, d_inner]（逐通道）
    """
    if block.config.a_mode == AMode.SCALAR_PER_HEAD:
        dt = ops.softplus(block.dt_proj(u))
    else:
        dt = ops.softplus(block.dt_proj(block.dt_down(u)))
    log_a = ops.neg(dt * ops.exp(block.a_log))
    return Discretized(log_a=log_a, b=block.b_proj(u), c=block.c_proj(u), dt=dt)


class Mamba2Block(Module):
    """结构化状态空间块"""

    def __init__(self, config: SSDConfig,
                 rng: Optional[np.random.Generator] = None,
                 dtype: Union[str, np.dtype] = "float32"):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        dtype = resolve_dtype(dtype)
        self.config = config
        d, d_inner, n = config.d_model, config.d_inner, config.d_state

        self.norm = LayerNorm(d, dtype=dtype)
        self.in_proj = Linear(d, d_inner, rng=rng, dtype=dtype)
        self.b_proj = Linear(d_inner, n, bias=False, rng=rng, dtype=dtype)
        self.c_proj = Linear(d_inner, n, bias=False, rng=rng, dtype=dtype)
        if config.a_mode == AMode.SCALAR_PER_HEAD:
            n_decay = config.n_heads
            self.dt_proj = Linear(d_inner, n_decay, rng=rng, dtype=dtype)
        else:
            n_decay = d_inner
            self.dt_down = Linear(d_inner, config.dt_rank, bias=False, rng=rng, dtype=dtype)
            self.dt_proj = Linear(config.dt_rank, n_decay, rng=rng, dtype=dtype)

        # 初始步长在 [dt_min, dt_max] 上对数均匀分布
        dt0 = np.exp(rng.uniform(np.log(config.dt_min), np.log(config.dt_max), size=n_decay))
        dt0 = np.maximum(dt0, 1e-4)
        self.dt_proj.bias.data[...] = inverse_softplus(dt0).astype(dtype)
        self.a_log = Parameter(np.log(rng.uniform(1.0, 16.0, size=n_decay)).astype(dtype), name="a_log")
        self.out_proj = Linear(d_inner, d, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        cfg = self.config
        if x.ndim != 3 or x.shape[1] != cfg.d_model:
            raise ShapeError(f"Mamba2Block 需要 [B, {cfg.d_model}, T]，得到 {x.shape}")
        batch, _, length = x.shape
        heads, head_dim = cfg.n_heads, cfg.head_dim

        seq = ops.transpose_last_two(x)
        u = ops.silu(self.in_proj(self.norm(seq)))
        disc = discretize(u, self)

        u4 = ops.reshape(u, (batch, length, heads, head_dim))
        if cfg.a_mode == AMode.SCALAR_PER_HEAD:
            dt4 = ops.reshape(disc.dt, (batch, length, heads, 1))
            log_a = disc.log_a
        else:
            dt4 = ops.reshape(disc.dt, (batch, length, heads, head_dim))
            log_a = ops.reshape(disc.log_a, (batch, length, heads, head_dim))
        y = scan_chunked_log(u4 * dt4, log_a, disc.b, disc.c, cfg.chunk)
        y = self.out_proj(ops.reshape(y, (batch, length, cfg.d_inner)))
        return x + ops.transpose_last_two(y)


class AttentionBlock(Module):
    """前置归一化 Transformer 块，时间和内存均为 O(T²)"""

    def __init__(self, d_model: int, n_heads: int, ffn_expand: int = 2,
                 rng: Optional[np.random.Generator] = None,
                 dtype: Union[str, np.dtype] = "float32"):
        super().__init__()
        if d_model % n_heads != 0:
            raise ShapeError(f"宽度 {d_model} 不能被头数 {n_heads} 整除")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.d_model = d_model
        self.n_heads = n_heads
        self.norm1 = LayerNorm(d_model, dtype=dtype)
        self.q_proj = Linear(d_model, d_model, rng=rng, dtype=dtype)
        self.k_proj = Linear(d_model, d_model, rng=rng, dtype=dtype)
        self.v_proj = Linear(d_model, d_model, rng=rng, dtype=dtype)
        self.out_proj = Linear(d_model, d_model, rng=rng, dtype=dtype)
        self.norm2 = LayerNorm(d_model, dtype=dtype)
        self.ffn = MLP(d_model, [ffn_expand * d_model], d_model, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[1] != self.d_model:
            raise ShapeError(f"AttentionBlock 需要 [B, {self.d_model}, T]，得到 {x.shape}")
        batch, _, length = x.shape
        heads = self.n_heads
        head_dim = self.d_model // heads

        seq = ops.transpose_last_two(x)
        h = self.norm1(seq)
        shape = (batch, length, heads, head_dim)
        q = ops.reshape(self.q_proj(h), shape)
        k = ops.reshape(self.k_proj(h), shape)
        v = ops.reshape(self.v_proj(h), shape)

        # 打分矩阵与 softmax 权重同时存活，两者一起预检
        tracker.reserve(2 * batch * heads * length * length * x.dtype.itemsize)
        scores = ops.einsum("bthp,bshp->bhts", q, k) * (1.0 / math.sqrt(head_dim))
        weights = ops.softmax(scores, axis=-1)
        context = ops.reshape(ops.einsum("bhts,bshp->bthp", weights, v), (batch, length, self.d_model))
        seq = seq + self.out_proj(context)
        seq = seq + self.ffn(self.norm2(seq))
        return ops.transpose_last_two(seq)
