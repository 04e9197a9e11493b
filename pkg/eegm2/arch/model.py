"""
EEGM2 网络

多尺度嵌入 → 三阶段编码器 → 中介层 → 带跳跃连接的插值解码器 → 1×1 输出头。
编码器阶段 2、3 各做一次 pool 倍下采样，因此输入长度需为 pool² 的倍数，
EEGM2.forward 会自动在右侧补零并把输出裁回原长度。
"""

import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..config import ArchConfig
from ..diffcore import ops
from ..diffcore.nn import Conv1d, Linear, Module
from ..diffcore.tensor import Tensor, as_tensor, resolve_dtype
from ..exceptions import ShapeError
from ..ssd import AttentionBlock, Mamba2Block

logger = logging.getLogger(__name__)

EMBED_KERNELS = (1, 3, 7)


def make_block(width: int, config: ArchConfig, rng: np.random.Generator,
               dtype: Union[str, np.dtype]) -> Module:
    """按变体选择序列块"""
    if config.uses_attention:
        return AttentionBlock(width, config.n_heads, rng=rng, dtype=dtype)
    return Mamba2Block(config.ssd_config(width), rng=rng, dtype=dtype)


def branch_widths(d1: int) -> Tuple[int, int, int]:
    """多尺度分支宽度，余数分给 k=1 分支"""
    if d1 < 3:
        raise ShapeError(f"多尺度嵌入要求 d1 >= 3，得到 {d1}")
    base = d1 // 3
    return d1 - 2 * base, base, base


class MultiScaleEmbed(Module):
    """并行的 k=1/3/7 卷积，按通道拼接；关闭多尺度时退化为单个 k=1 卷积"""

    def __init__(self, c_in: int, d1: int, multiscale: bool = True,
                 rng: Optional[np.random.Generator] = None,
                 dtype: Union[str, np.dtype] = "float32"):
        super().__init__()
        self.multiscale = multiscale
        if multiscale:
            for k, width in zip(EMBED_KERNELS, branch_widths(d1)):
                setattr(self, f"conv_k{k}", Conv1d(c_in, width, k, rng=rng, dtype=dtype))
        else:
            self.conv_k1 = Conv1d(c_in, d1, 1, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        if not self.multiscale:
            return self.conv_k1(x)
        return ops.concat([getattr(self, f"conv_k{k}")(x) for k in EMBED_KERNELS], axis=1)


class ChannelLinear(Module):
    """作用在 [B, C, T] 通道维上的线性层"""

    def __init__(self, d_in: int, d_out: int, rng: Optional[np.random.Generator] = None,
                 dtype: Union[str, np.dtype] = "float32"):
        super().__init__()
        self.linear = Linear(d_in, d_out, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return ops.transpose_last_two(self.linear(ops.transpose_last_two(x)))


class ProjectionStage(Module):
    """编码阶段 1：全分辨率线性投影 + 序列块"""

    def __init__(self, config: ArchConfig, rng: np.random.Generator, dtype):
        super().__init__()
        d1 = config.stage_widths[0]
        self.proj = ChannelLinear(d1, d1, rng=rng, dtype=dtype)
        self.block = make_block(d1, config, rng, dtype)

    def forward(self, x: Tensor) -> Tensor:
        return self.block(self.proj(x))


class DownStage(Module):
    """编码阶段 2/3：时间卷积 + SiLU + 最大池化"""

    def __init__(self, c_in: int, c_out: int, pool: int, rng: np.random.Generator, dtype):
        super().__init__()
        self.pool = pool
        self.conv = Conv1d(c_in, c_out, 3, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return ops.max_pool1d(ops.silu(self.conv(x)), self.pool)


class Encoder(Module):
    def __init__(self, config: ArchConfig, rng: np.random.Generator, dtype):
        super().__init__()
        d1, d2, d3 = config.stage_widths
        self.pool = config.pool
        self.stage1 = ProjectionStage(config, rng, dtype)
        self.stage2 = DownStage(d1, d2, config.pool, rng, dtype)
        self.stage3 = DownStage(d2, d3, config.pool, rng, dtype)

    def forward(self, x: Tensor) -> Tuple[Tensor, List[Tensor]]:
        """
        Returns:
            (z_enc [B, d3, T/pool²], [阶段1输出 [B, d1, T], 阶段2输出 [B, d2, T/pool]])
        """
        length = x.shape[-1]
        multiple = self.pool ** 2
        if length % multiple:
            need = -length % multiple
            raise ShapeError(f"序列长度 {length} 不是 {multiple} 的倍数，需要在右侧补 {need} 个点")
        s1 = self.stage1(x)
        s2 = self.stage2(s1)
        z = self.stage3(s2)
        return z, [s1, s2]


class Mediator(Module):
    """线性层 → 序列块 → 线性层"""

    def __init__(self, config: ArchConfig, rng: np.random.Generator, dtype):
        super().__init__()
        d3 = config.stage_widths[2]
        self.proj_in = ChannelLinear(d3, d3, rng=rng, dtype=dtype)
        self.block = make_block(d3, config, rng, dtype)
        self.proj_out = ChannelLinear(d3, d3, rng=rng, dtype=dtype)

    def forward(self, z: Tensor) -> Tensor:
        return self.proj_out(self.block(self.proj_in(z)))


class UpStage(Module):
    """插值上采样 → 序列块 → 拼接跳跃连接 → 降宽卷积"""

    def __init__(self, c_in: int, c_skip: int, c_out: int, pool: int,
                 config: ArchConfig, rng: np.random.Generator, dtype):
        super().__init__()
        self.pool = pool
        self.c_skip = c_skip
        self.block = make_block(c_in, config, rng, dtype)
        self.conv = Conv1d(c_in + c_skip, c_out, 3, rng=rng, dtype=dtype)

    def forward(self, x: Tensor, skip: Tensor) -> Tensor:
        target = x.shape[-1] * self.pool
        if skip.ndim != 3 or skip.shape[0] != x.shape[0] or skip.shape[1:] != (self.c_skip, target):
            raise ShapeError(
                f"跳跃连接形状 {skip.shape} 与解码阶段不匹配，应为 "
                f"({x.shape[0]}, {self.c_skip}, {target})"
            )
        up = self.block(ops.interp_upsample(x, target))
        return ops.silu(self.conv(ops.concat([up, skip], axis=1)))


class Decoder(Module):
    def __init__(self, config: ArchConfig, rng: np.random.Generator, dtype):
        super().__init__()
        d1, d2, d3 = config.stage_widths
        self.stage1 = UpStage(d3, d2, d2, config.pool, config, rng, dtype)
        self.stage2 = UpStage(d2, d1, d1, config.pool, config, rng, dtype)

    def forward(self, z: Tensor, skips: List[Tensor]) -> Tensor:
        if len(skips) != 2:
            raise ShapeError(f"解码器需要两个跳跃连接，得到 {len(skips)} 个")
        h = self.stage1(z, skips[1])
        return self.stage2(h, skips[0])


class EEGM2(Module):
    """
    U 形编码器-中介层-解码器重建网络

    Args:
        config: 结构配置
        seed: 参数初始化随机种子
        dtype: 参数精度
    """

    def __init__(self, config: ArchConfig, seed: int = 0,
                 dtype: Union[str, np.dtype] = "float32"):
        super().__init__()
        dtype = resolve_dtype(dtype)
        rng = np.random.default_rng(seed)
        self.config = config
        self.seed = seed
        d1 = config.stage_widths[0]
        self.embed = MultiScaleEmbed(config.in_channels, d1, config.uses_multiscale, rng=rng, dtype=dtype)
        self.encoder = Encoder(config, rng, dtype)
        self.mediator = Mediator(config, rng, dtype)
        self.decoder = Decoder(config, rng, dtype)
        self.head = Conv1d(d1, config.in_channels, 1, rng=rng, dtype=dtype)

    def pad_amount(self, length: int) -> int:
        return -length % self.config.length_multiple

    def _prepare(self, x: Union[Tensor, np.ndarray]) -> Tuple[Tensor, int]:
        x = as_tensor(x)
        if x.ndim != 3 or x.shape[1] != self.config.in_channels:
            raise ShapeError(
                f"输入应为 [B, {self.config.in_channels}, T]，得到 {x.shape}"
            )
        if x.dtype != self.dtype:
            x = as_tensor(x.data.astype(self.dtype))
        length = x.shape[-1]
        pad = self.pad_amount(length)
        if length + pad < 2 * self.config.length_multiple:
            raise ShapeError(f"序列过短: T={length}，至少需要 {2 * self.config.length_multiple}")
        return ops.pad_last(x, 0, pad), length

    def forward_features(self, x: Union[Tensor, np.ndarray]) -> Tensor:
        """输出头之前的解码特征 [B, d1, T]"""
        padded, length = self._prepare(x)
        z, skips = self.encoder(self.embed(padded))
        features = self.decoder(self.mediator(z), skips)
        if features.shape[-1] != length:
            features = ops.slice_axis(features, -1, 0, length)
        return features

    def forward(self, x: Union[Tensor, np.ndarray]) -> Tensor:
        """重建 [B, C_in, T] → [B, C_in, T]"""
        padded, length = self._prepare(x)
        z, skips = self.encoder(self.embed(padded))
        out = self.head(self.decoder(self.mediator(z), skips))
        if out.shape[-1] != length:
            out = ops.slice_axis(out, -1, 0, length)
        return out

    def forward_padded(self, x: Union[Tensor, np.ndarray]) -> Tuple[Tensor, Tensor, np.ndarray]:
        """
        返回补零后的输入、对应重建和有效位置掩码，配合 masked_reconstruction_loss 使用

        Returns:
            (补零输入 [B, C, T_pad], 重建 [B, C, T_pad], 掩码 [T_pad])
        """
        padded, length = self._prepare(x)
        z, skips = self.encoder(self.embed(padded))
        out = self.head(self.decoder(self.mediator(z), skips))
        mask = np.arange(padded.shape[-1]) < length
        return padded, out, mask

    def encoder_parameter_count(self) -> int:
        return self.embed.num_parameters() + self.encoder.num_parameters()

    def summary(self) -> Dict[str, int]:
        """各顶层模块的参数量"""
        counts = {name: module.num_parameters() for name, module in self._modules.items()}
        counts["total"] = self.num_parameters()
        return counts

    @property
    def tap_points(self) -> List[str]:
        return ["encoder.stage1", "encoder.stage2", "encoder.stage3"]
