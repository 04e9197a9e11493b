"""
可微运算

网络所需的全部张量运算。卷积采用互相关约定并零填充保持长度；
最大池化在并列最大值时取最早的位置；rFFT 不做 1/T 归一化。
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse, special

from ..exceptions import ShapeError
from .memory import tracker
from .tensor import (
    Tensor,
    add,
    as_tensor,
    div,
    getitem,
    make_op,
    matmul,
    mul,
    neg,
    power,
    reshape,
    sub,
    tensor_mean,
    tensor_sum,
    transpose,
    transpose_last_two,
    unbroadcast,
)

__all__ = [
    "add", "sub", "mul", "div", "neg", "power", "matmul", "reshape", "transpose",
    "transpose_last_two", "getitem", "tensor_sum", "tensor_mean",
    "exp", "log", "sqrt", "absolute", "silu", "softplus", "sigmoid", "relu",
    "softmax", "log_softmax", "where", "cumsum", "concat", "stack", "slice_axis",
    "pad_last", "pad_axis", "broadcast_to", "cast", "einsum", "linear", "conv1d", "layernorm", "max_pool1d",
    "interp_upsample", "rfft_mag",
]


# 逐元素非线性


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make_op(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    return make_op(np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)
    return make_op(out, (x,), lambda g: (g * 0.5 / out,))


def absolute(x: Tensor) -> Tensor:
    return make_op(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def sigmoid(x: Tensor) -> Tensor:
    out = special.expit(x.data)
    return make_op(out, (x,), lambda g: (g * out * (1 - out),))


def silu(x: Tensor) -> Tensor:
    s = special.expit(x.data)
    out = x.data * s
    return make_op(out, (x,), lambda g: (g * (s + x.data * s * (1 - s)),))


def softplus(x: Tensor) -> Tensor:
    out = np.logaddexp(0, x.data).astype(x.dtype, copy=False)
    return make_op(out, (x,), lambda g: (g * special.expit(x.data),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_op(x.data * mask, (x,), lambda g: (g * mask,))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    out = special.softmax(x.data, axis=axis).astype(x.dtype, copy=False)

    def backward(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_op(out, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    out = special.log_softmax(x.data, axis=axis).astype(x.dtype, copy=False)

    def backward(g: np.ndarray):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_op(out, (x,), backward)


def where(mask: np.ndarray, x: Tensor, fill: float) -> Tensor:
    """mask 为真处取 x，否则取常数 fill；梯度只流向 mask 为真的位置"""
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    out = np.where(mask, x.data, np.asarray(fill, dtype=x.dtype))
    return make_op(out, (x,), lambda g: (np.where(mask, g, 0).astype(g.dtype, copy=False),))


def cumsum(x: Tensor, axis: int) -> Tensor:
    def backward(g: np.ndarray):
        return (np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis),)

    return make_op(np.cumsum(x.data, axis=axis), (x,), backward)


# 布局


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat 需要至少一个张量")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise ShapeError(
                f"concat 形状不匹配: {[tt.shape for tt in tensors]} (axis={axis})"
            )
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, splits, axis=axis))

    return make_op(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("stack 需要至少一个张量")
    shape = tensors[0].shape
    if any(t.shape != shape for t in tensors):
        raise ShapeError(f"stack 形状不一致: {[t.shape for t in tensors]}")
    axis = axis % (len(shape) + 1)

    def backward(g: np.ndarray):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return make_op(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    index: List[slice] = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    return getitem(x, tuple(index))


def pad_axis(x: Tensor, axis: int, left: int, right: int) -> Tensor:
    """沿指定维两端补零"""
    if left == 0 and right == 0:
        return x
    axis = axis % x.ndim
    widths = [(0, 0)] * x.ndim
    widths[axis] = (left, right)
    size = x.shape[axis]

    def backward(g: np.ndarray):
        index: List[slice] = [slice(None)] * g.ndim
        index[axis] = slice(left, left + size)
        return (g[tuple(index)],)

    return make_op(np.pad(x.data, widths), (x,), backward)


def pad_last(x: Tensor, left: int, right: int) -> Tensor:
    return pad_axis(x, -1, left, right)


def broadcast_to(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    shape = tuple(shape)
    out = np.broadcast_to(x.data, shape).copy()
    return make_op(out, (x,), lambda g: (unbroadcast(g, x.shape),))


def cast(x: Tensor, dtype) -> Tensor:
    """精度转换，梯度按原精度返回"""
    target = np.dtype(dtype)
    if x.dtype == target:
        return x
    return make_op(x.data.astype(target), (x,), lambda g: (g.astype(x.dtype),))


# 爱因斯坦求和


def _parse_einsum(subscripts: str, n_operands: int) -> Tuple[List[str], str]:
    if "..." in subscripts:
        raise ValueError("einsum 不支持省略号，请写出全部下标")
    lhs, _, rhs = subscripts.replace(" ", "").partition("->")
    inputs = lhs.split(",")
    if len(inputs) != n_operands:
        raise ShapeError(f"einsum 下标 '{subscripts}' 与 {n_operands} 个操作数不符")
    for spec in inputs:
        if len(set(spec)) != len(spec):
            raise ValueError(f"einsum 不支持单个操作数内重复下标: '{spec}'")
    return inputs, rhs


def einsum(subscripts: str, *operands: Tensor) -> Tensor:
    """
    带梯度的 einsum

    每个操作数的下标不可重复；输出形状在真正计算之前先做内存预检。
    """
    inputs, output = _parse_einsum(subscripts, len(operands))
    sizes = {}
    for spec, op in zip(inputs, operands):
        if len(spec) != op.ndim:
            raise ShapeError(f"einsum 下标 '{spec}' 与形状 {op.shape} 不符")
        for ch, n in zip(spec, op.shape):
            if sizes.setdefault(ch, n) != n:
                raise ShapeError(f"einsum 下标 '{ch}' 维度冲突: {sizes[ch]} vs {n}")
    out_shape = tuple(sizes[ch] for ch in output)
    itemsize = np.result_type(*[op.dtype for op in operands]).itemsize
    tracker.reserve(int(np.prod(out_shape, dtype=np.int64)) * itemsize)
    out = np.einsum(subscripts, *[op.data for op in operands], optimize=True)

    def backward(g: np.ndarray):
        grads = []
        for k, (spec, op) in enumerate(zip(inputs, operands)):
            if not op.requires_grad:
                grads.append(None)
                continue
            others = [(s, o.data) for j, (s, o) in enumerate(zip(inputs, operands)) if j != k]
            available = set(output).union(*[set(s) for s, _ in others])
            kept = "".join(ch for ch in spec if ch in available)
            expr = ",".join([output] + [s for s, _ in others]) + "->" + kept
            partial = np.einsum(expr, g, *[o for _, o in others], optimize=True)
            # 只出现在该操作数中的下标：梯度沿该维广播
            expand_shape = tuple(sizes[ch] if ch in available else 1 for ch in spec)
            partial = partial.reshape(expand_shape)
            grads.append(np.broadcast_to(partial, op.shape).copy())
        return grads

    return make_op(np.asarray(out), operands, backward)


# 线性层与卷积


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """沿最后一维的仿射变换 x @ W^T + b"""
    d_out, d_in = weight.shape
    if x.shape[-1] != d_in:
        raise ShapeError(f"linear 输入最后一维 {x.shape[-1]} 与权重输入维 {d_in} 不符")
    if bias is not None and bias.shape != (d_out,):
        raise ShapeError(f"linear 偏置形状 {bias.shape} 应为 ({d_out},)")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, d_in)
    out = x2 @ weight.data.T
    if bias is not None:
        out = out + bias.data
    out = out.reshape(lead + (d_out,))

    def backward(g: np.ndarray):
        g2 = g.reshape(-1, d_out)
        gx = (g2 @ weight.data).reshape(x.shape)
        gw = g2.T @ x2
        gb = g2.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_op(out, parents, backward)


def conv1d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    一维卷积（互相关，'same' 零填充）

    Args:
        x: 输入 [B, Cin, T]
        weight: 卷积核 [Cout, Cin, K]，K 为奇数
        bias: 偏置 [Cout]

    Returns:
        输出 [B, Cout, T]
    """
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d 需要 [B,Cin,T] 与 [Cout,Cin,K]，得到 {x.shape} 和 {weight.shape}")
    batch, c_in, length = x.shape
    c_out, w_in, k = weight.shape
    if w_in != c_in:
        raise ShapeError(f"conv1d 输入通道 {c_in} 与卷积核输入通道 {w_in} 不符")
    if k % 2 != 1:
        raise ShapeError(f"conv1d 卷积核长度必须为奇数，得到 {k}")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"conv1d 偏置形状 {bias.shape} 应为 ({c_out},)")
    pad = (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(xp, k, axis=2)  # [B, Cin, T, K]
    out = np.tensordot(windows, weight.data, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = np.ascontiguousarray(out)

    def backward(g: np.ndarray):
        gw = np.tensordot(g, windows, axes=([0, 2], [0, 2]))
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, :, j:j + length] += np.tensordot(weight.data[:, :, j], g, axes=([0], [1])).transpose(1, 0, 2)
        gx = gxp[:, :, pad:pad + length]
        gb = g.sum(axis=(0, 2)) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_op(out, parents, backward)


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """沿最后一维做层归一化（总体方差）"""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layernorm 仿射参数形状应为 ({d},)，得到 {gamma.shape}/{beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    out = xhat * gamma.data + beta.data

    def backward(g: np.ndarray):
        gxhat = g * gamma.data
        gx = inv_std * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(x.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return make_op(out.astype(x.dtype, copy=False), (x, gamma, beta), backward)


def max_pool1d(x: Tensor, k: int, stride: Optional[int] = None) -> Tensor:
    """沿时间轴最大池化，T' = floor((T-k)/stride) + 1"""
    stride = stride or k
    if x.ndim != 3:
        raise ShapeError(f"max_pool1d 需要 [B,C,T]，得到 {x.shape}")
    batch, channels, length = x.shape
    if length < k:
        raise ShapeError(f"max_pool1d 序列长度 {length} 小于窗口 {k}")
    windows = sliding_window_view(x.data, k, axis=2)[:, :, ::stride]  # [B, C, T', k]
    idx = windows.argmax(axis=-1)  # 并列时取最早位置
    out = np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0]
    positions = np.arange(out.shape[-1]) * stride + idx

    def backward(g: np.ndarray):
        gx = np.zeros_like(x.data).reshape(batch * channels, length)
        rows = np.repeat(np.arange(batch * channels), out.shape[-1])
        np.add.at(gx, (rows, positions.reshape(-1)), g.reshape(-1))
        return (gx.reshape(x.shape),)

    return make_op(np.ascontiguousarray(out), (x,), backward)


def _interp_matrix(length: int, length_out: int, dtype: np.dtype) -> sparse.csr_matrix:
    """端点对齐的线性插值矩阵 [T_out, T]，位置 i 映射到 i·(T-1)/(T_out-1)"""
    i = np.arange(length_out, dtype=np.int64)
    numer = i * (length - 1)
    denom = length_out - 1
    left = np.minimum(numer // denom, length - 2)
    frac = (numer - left * denom) / denom
    rows = np.concatenate([i, i])
    cols = np.concatenate([left, left + 1])
    vals = np.concatenate([1.0 - frac, frac]).astype(dtype)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(length_out, length))


def interp_upsample(x: Tensor, length_out: int) -> Tensor:
    """
    无参数线性插值上采样

    Args:
        x: 输入 [B, C, T]，T >= 2
        length_out: 目标长度，>= 2

    Returns:
        输出 [B, C, T_out]
    """
    if x.ndim != 3:
        raise ShapeError(f"interp_upsample 需要 [B,C,T]，得到 {x.shape}")
    batch, channels, length = x.shape
    if length < 2 or length_out < 2:
        raise ShapeError(f"interp_upsample 要求 T >= 2 且 T_out >= 2，得到 {length} -> {length_out}")
    if length_out == length:
        return x
    matrix = _interp_matrix(length, length_out, x.dtype)
    x2 = x.data.reshape(-1, length)
    out = np.asarray((matrix @ x2.T).T).reshape(batch, channels, length_out)

    def backward(g: np.ndarray):
        g2 = g.reshape(-1, length_out)
        return (np.asarray((matrix.T @ g2.T).T).reshape(x.shape),)

    return make_op(out.astype(x.dtype, copy=False), (x,), backward)


def rfft_mag(x: Tensor) -> Tensor:
    """
    实数 FFT 幅度谱（不归一化），沿最后一维

    Returns:
        [..., floor(T/2)+1] 的幅度
    """
    length = x.shape[-1]
    if length < 2:
        raise ShapeError(f"rfft_mag 要求 T >= 2，得到 {length}")
    spectrum = np.fft.rfft(x.data, axis=-1)
    mag = np.abs(spectrum)
    n_bins = mag.shape[-1]

    def backward(g: np.ndarray):
        safe = mag > np.finfo(mag.dtype).tiny
        phase = np.where(safe, spectrum / np.where(safe, mag, 1.0), 0.0)
        full = np.zeros(x.shape[:-1] + (length,), dtype=np.complex128)
        full[..., :n_bins] = g * phase
        return ((np.real(np.fft.ifft(full, axis=-1)) * length).astype(x.dtype),)

    return make_op(mag.astype(x.dtype, copy=False), (x,), backward)
