"""
选择性扫描

    h_t = a_t · h_{t-1} + x_t ⊗ B_t
    y_t = h_t · C_t

张量布局：x 为 [B, T, H, P]；衰减 a 为 [B, T, H]（每头一个标量）或 [B, T, H, P]（逐通道）；
B_t、C_t 为 [B, T, N]，所有头共享。三维输入 x [B, T, D] 视为单头，此时 a 为 [B, T] 或 [B, T, D]。

scan_naive 逐步递推，只做前向，作为正确性基准；scan_chunked 在块内用带掩码的二次型计算，
块间用衰减乘积传递状态，时间开销对 T 线性。
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from ..diffcore import ops
from ..diffcore.tensor import Tensor, as_tensor, make_op
from ..exceptions import NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

ArrayOrTensor = Union[np.ndarray, Tensor]

# 衰减为 0 时在对数域用 exp(-80) 代替
LOG_DECAY_FLOOR = -80.0


def _data(value: ArrayOrTensor) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else np.asarray(value)


def _check_sequences(x_shape: Tuple[int, ...], a_shape: Tuple[int, ...],
                     b_shape: Tuple[int, ...], c_shape: Tuple[int, ...]) -> None:
    if len(x_shape) != 4:
        raise ShapeError(f"扫描输入应为 [B,T,H,P]，得到 {x_shape}")
    batch, length, heads, p = x_shape
    if a_shape not in ((batch, length, heads), (batch, length, heads, p)):
        raise ShapeError(f"衰减序列形状 {a_shape} 与输入 {x_shape} 不匹配")
    if len(b_shape) != 3 or b_shape[:2] != (batch, length):
        raise ShapeError(f"B 序列形状 {b_shape} 与输入 {x_shape} 不匹配")
    if c_shape != b_shape:
        raise ShapeError(f"C 序列形状 {c_shape} 与 B 序列 {b_shape} 不一致")


def _head_shapes(x_shape: Tuple[int, ...], a_shape: Tuple[int, ...]):
    """把三维输入改写成单头的四维布局"""
    if len(x_shape) == 4:
        return x_shape, a_shape
    if len(x_shape) != 3:
        raise ShapeError(f"扫描输入应为 [B,T,D] 或 [B,T,H,P]，得到 {x_shape}")
    batch, length, d = x_shape
    x4 = (batch, length, 1, d)
    if a_shape == (batch, length):
        return x4, (batch, length, 1)
    if a_shape == (batch, length, d):
        return x4, (batch, length, 1, d)
    raise ShapeError(f"衰减序列形状 {a_shape} 与输入 {x_shape} 不匹配")


def scan_naive(x: ArrayOrTensor, a: ArrayOrTensor, b: ArrayOrTensor, c: ArrayOrTensor,
               h0: Optional[np.ndarray] = None) -> np.ndarray:
    """
    顺序递推求值（正确性基准，不记录梯度）

    Args:
        x: 输入序列
        a: 衰减因子序列
        b: B_t 序列 [B, T, N]
        c: C_t 序列 [B, T, N]
        h0: 初始状态 [B, H, P, N]，默认全零

    Returns:
        与 x 同形状的输出
    """
    x, a, b, c = _data(x), _data(a), _data(b), _data(c)
    x_shape, a_shape = _head_shapes(x.shape, a.shape)
    _check_sequences(x_shape, a_shape, b.shape, c.shape)
    x4 = x.reshape(x_shape)
    a4 = a.reshape(a_shape)
    batch, length, heads, p = x_shape
    n = b.shape[-1]
    dtype = np.result_type(x, a, b, c)
    per_channel = a4.ndim == 4

    h = np.zeros((batch, heads, p, n), dtype=dtype) if h0 is None else np.array(h0, dtype=dtype)
    y = np.empty(x_shape, dtype=dtype)
    for t in range(length):
        decay = a4[:, t, :, :, None] if per_channel else a4[:, t, :, None, None]
        h = decay * h + x4[:, t, :, :, None] * b[:, t, None, None, :]
        if not np.all(np.isfinite(h)):
            raise NonFiniteError(f"扫描状态在位置 {t} 出现非有限值", position=t)
        y[:, t] = np.einsum("bhpn,bn->bhp", h, c[:, t])
    return y.reshape(x.shape)


def _segment_sums(log_a: Tensor) -> Tensor:
    """
    块内分段和

    输入 [..., l]，输出 [..., l, l]：(t, s) 处为 log_a[s+1..t] 之和，t < s 处为 -inf。
    直接累加而不是做前缀和相减，避免大数相消。
    """
    length = log_a.shape[-1]
    rep = ops.broadcast_to(ops.reshape(log_a, log_a.shape + (1,)), log_a.shape + (length,))
    strictly_lower = np.tril(np.ones((length, length), dtype=bool), k=-1)
    rep = ops.where(strictly_lower, rep, 0.0)
    sums = ops.cumsum(rep, axis=-2)
    lower = np.tril(np.ones((length, length), dtype=bool))
    return ops.where(lower, sums, -np.inf)


def _pass_states(states: Tensor, chunk_log_decay: Tensor) -> Tensor:
    """
    块间状态传递

    entering[k+1] = exp(chunk_log_decay[k]) · entering[k] + states[k]，entering[0] = 0。
    跨块必须顺序执行，这里用专门的反向函数保证反向开销同样对块数线性。
    """
    decay = np.exp(chunk_log_decay.data)
    extra = states.ndim - chunk_log_decay.ndim
    d = decay.reshape(decay.shape + (1,) * extra)
    reduce_axes = tuple(range(-extra, 0))
    n_chunks = states.shape[1]

    entering = np.zeros_like(states.data)
    h = np.zeros_like(states.data[:, 0])
    for k in range(n_chunks):
        entering[:, k] = h
        h = d[:, k] * h + states.data[:, k]

    def backward(g: np.ndarray):
        g_states = np.zeros_like(states.data)
        g_log = np.zeros_like(chunk_log_decay.data)
        carry = np.zeros_like(g[:, 0])
        for k in range(n_chunks - 1, -1, -1):
            g_states[:, k] = carry
            g_log[:, k] = (carry * entering[:, k]).sum(axis=reduce_axes) * decay[:, k]
            carry = g[:, k] + d[:, k] * carry
        return g_states, g_log

    return make_op(entering, (states, chunk_log_decay), backward)


def _raise_on_non_finite(y: Tensor, length: int) -> None:
    finite = np.isfinite(y.data).reshape(y.shape[0], length, -1).all(axis=(0, 2))
    if not finite.all():
        position = int(np.argmin(finite))
        raise NonFiniteError(f"扫描输出在位置 {position} 出现非有限值", position=position)


def scan_chunked_log(x: Tensor, log_a: Tensor, b: Tensor, c: Tensor, chunk: int = 64) -> Tensor:
    """
    对数域分块扫描（可微）

    Args:
        x: 输入 [B, T, H, P]
        log_a: 对数衰减 [B, T, H] 或 [B, T, H, P]，取值 <= 0
        b: B_t [B, T, N]
        c: C_t [B, T, N]
        chunk: 块长

    Returns:
        输出 [B, T, H, P]
    """
    if chunk < 1:
        raise ValueError(f"块长必须 >= 1，得到 {chunk}")
    _check_sequences(x.shape, log_a.shape, b.shape, c.shape)
    batch, length, heads, p = x.shape
    n = b.shape[-1]
    per_channel = log_a.ndim == 4

    size = min(chunk, length)
    n_chunks = math.ceil(length / size)
    pad = n_chunks * size - length
    if pad:
        x = ops.pad_axis(x, 1, 0, pad)
        log_a = ops.pad_axis(log_a, 1, 0, pad)
        b = ops.pad_axis(b, 1, 0, pad)
        c = ops.pad_axis(c, 1, 0, pad)

    xc = ops.reshape(x, (batch, n_chunks, size, heads, p))
    bc = ops.reshape(b, (batch, n_chunks, size, n))
    cc = ops.reshape(c, (batch, n_chunks, size, n))
    if per_channel:
        la = ops.transpose(ops.reshape(log_a, (batch, n_chunks, size, heads, p)), (0, 1, 3, 4, 2))
        decay_idx = "hp"
    else:
        la = ops.transpose(ops.reshape(log_a, (batch, n_chunks, size, heads)), (0, 1, 3, 2))
        decay_idx = "h"

    # 块内：带因果掩码的二次型
    segments = _segment_sums(la)
    gram = ops.einsum("bctn,bcsn->bcts", cc, bc)
    y_diag = ops.einsum(f"bcts,bc{decay_idx}ts,bcshp->bcthp", gram, ops.exp(segments), xc)

    # 每个块结束时的局部状态
    to_end = ops.exp(ops.reshape(ops.slice_axis(segments, -2, size - 1, size), la.shape))
    states = ops.einsum(f"bcsn,bc{decay_idx}s,bcshp->bchpn", bc, to_end, xc)

    # 块间：顺序传递进入每个块时的状态
    entering = _pass_states(states, ops.tensor_sum(la, axis=-1))
    from_start = ops.exp(ops.cumsum(la, axis=-1))
    y_off = ops.einsum(f"bctn,bchpn,bc{decay_idx}t->bcthp", cc, entering, from_start)

    y = ops.reshape(y_diag + y_off, (batch, n_chunks * size, heads, p))
    if pad:
        y = ops.slice_axis(y, 1, 0, length)
    _raise_on_non_finite(y, length)
    return y


def scan_chunked(x: ArrayOrTensor, a: ArrayOrTensor, b: ArrayOrTensor, c: ArrayOrTensor,
                 chunk: int = 64) -> Tensor:
    """
    分块扫描，接口与 scan_naive 相同，衰减以 a_t ∈ [0, 1] 给出

    Args:
        x: 输入序列
        a: 衰减因子序列
        b: B_t 序列 [B, T, N]
        c: C_t 序列 [B, T, N]
        chunk: 块长

    Returns:
        与 x 同形状的输出张量
    """
    x_t = as_tensor(x)
    a_t, b_t, c_t = as_tensor(a, x_t), as_tensor(b, x_t), as_tensor(c, x_t)
    x_shape, a_shape = _head_shapes(x_t.shape, a_t.shape)
    floor = np.exp(LOG_DECAY_FLOOR)
    log_a = ops.log(ops.where(a_t.data > floor, a_t, floor))
    y = scan_chunked_log(ops.reshape(x_t, x_shape), ops.reshape(log_a, a_shape), b_t, c_t, chunk)
    return ops.reshape(y, x_t.shape)
