"""
张量与梯度带

Tensor 是对 numpy 数组的轻量封装。只有在 GradTape 处于激活状态时才会记录计算图，
GradTape.gradient 按记录顺序的逆序回放，得到反向模式梯度。
"""

import threading
import weakref
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import NonFiniteError, ShapeError
from .memory import tracker

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

DTYPES = {"float32": np.float32, "float64": np.float64}

_state = threading.local()


def resolve_dtype(dtype: Union[str, np.dtype, type, None]) -> np.dtype:
    if dtype is None:
        return np.dtype(np.float64)
    if isinstance(dtype, str):
        if dtype not in DTYPES:
            raise ValueError(f"不支持的数据类型: {dtype}，可选 {sorted(DTYPES)}")
        return np.dtype(DTYPES[dtype])
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"不支持的数据类型: {resolved}")
    return resolved


class Tensor:
    """可微张量"""

    __slots__ = ("data", "requires_grad", "name", "_parents", "_backward", "__weakref__")

    def __init__(self,
                 data: ArrayLike,
                 requires_grad: bool = False,
                 name: Optional[str] = None,
                 dtype: Union[str, np.dtype, None] = None,
                 _owns_data: bool = True):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(resolve_dtype(dtype), copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        if _owns_data and arr.nbytes:
            weakref.finalize(self, tracker.release, tracker.allocate(arr.nbytes))

    # 基本属性

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.item())

    def detach(self) -> "Tensor":
        return Tensor(self.data, _owns_data=False)

    def astype(self, dtype: Union[str, np.dtype]) -> "Tensor":
        return Tensor(self.data.astype(resolve_dtype(dtype)), requires_grad=self.requires_grad,
                      name=self.name)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"

    def __len__(self) -> int:
        return self.shape[0]

    # 运算符

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        return getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


class Parameter(Tensor):
    """可学习参数"""

    __slots__ = ()

    def __init__(self, data: ArrayLike, name: Optional[str] = None,
                 dtype: Union[str, np.dtype, None] = None):
        super().__init__(np.array(data, copy=True), requires_grad=True, name=name, dtype=dtype)


class GradTape:
    """
    梯度带

    在 with 语句块内执行的可微运算会按执行顺序记录下来。记录顺序本身就是拓扑序，
    因此逆序回放即可完成反向传播。同一条梯度带只能在创建它的线程中使用。
    """

    def __init__(self):
        self.ops: List[Tensor] = []
        self._thread = threading.get_ident()

    def __enter__(self) -> "GradTape":
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def record(self, node: Tensor) -> None:
        if threading.get_ident() != self._thread:
            raise RuntimeError("GradTape 不能跨线程使用")
        self.ops.append(node)

    def gradient(self, target: Tensor, sources: Sequence[Tensor]) -> List[np.ndarray]:
        """
        计算 target 对 sources 的梯度

        非标量 target 等价于对其所有元素求和后求导。未参与计算的参数梯度恰好为零。

        Args:
            target: 目标张量（通常是标量损失）
            sources: 求导对象

        Returns:
            与 sources 一一对应的梯度数组
        """
        keep = {id(s) for s in sources}
        grads = {id(target): np.ones_like(target.data)}
        for node in reversed(self.ops):
            key = id(node)
            g = grads.get(key) if key in keep else grads.pop(key, None)
            if g is None:
                continue
            parent_grads = node._backward(g)
            for parent, pg in zip(node._parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                pid = id(parent)
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg
        return [
            np.asarray(grads[id(s)], dtype=s.dtype) if id(s) in grads else np.zeros_like(s.data)
            for s in sources
        ]


def _tape_stack() -> List[GradTape]:
    if not hasattr(_state, "tapes"):
        _state.tapes = []
    return _state.tapes


def current_tape() -> Optional[GradTape]:
    stack = _tape_stack()
    return stack[-1] if stack else None


def as_tensor(value: ArrayLike, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype), _owns_data=False)


def make_op(data: np.ndarray,
            parents: Sequence[Tensor],
            backward: BackwardFn,
            owns_data: bool = True) -> Tensor:
    """创建运算结果；当梯度带激活且有输入需要梯度时登记反向函数"""
    tape = current_tape()
    needs_grad = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs_grad, _owns_data=owns_data)
    if needs_grad:
        out._parents = tuple(parents)
        out._backward = backward
        tape.record(out)
    return out


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """把广播后的梯度求和还原到原始形状"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def check_finite(arr: np.ndarray, what: str, position: Optional[int] = None) -> None:
    if not np.all(np.isfinite(arr)):
        where = f" (位置 {position})" if position is not None else ""
        raise NonFiniteError(f"{what} 出现非有限值{where}", position=position)


def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


# 逐元素运算


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return make_op(a.data + b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return make_op(a.data - b.data, (a, b),
                   lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    return make_op(a.data * b.data, (a, b),
                   lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)))


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _pair(a, b)
    out = a.data / b.data

    def backward(g: np.ndarray):
        return (unbroadcast(g / b.data, a.shape),
                unbroadcast(-g * out / b.data, b.shape))

    return make_op(out, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return make_op(-a.data, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    out = a.data ** exponent
    return make_op(out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),))


def _pair(a: ArrayLike, b: ArrayLike) -> Tuple[Tensor, Tensor]:
    like = a if isinstance(a, Tensor) else b if isinstance(b, Tensor) else None
    return as_tensor(a, like), as_tensor(b, like)


# 归约


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_op(np.asarray(out), (a,), backward)


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return tensor_sum(a, axis=axes, keepdims=keepdims) * (1.0 / count)


# 布局运算（梯度直接透传）


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    out = a.data.reshape(shape)
    return make_op(out, (a,), lambda g: (g.reshape(a.shape),),
                   owns_data=not np.may_share_memory(out, a.data))


def transpose(a: Tensor, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return make_op(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),),
                   owns_data=False)


def transpose_last_two(a: Tensor) -> Tensor:
    if a.ndim < 2:
        raise ShapeError(f"transpose_last_two 需要至少二维张量，得到 {a.shape}")
    axes = tuple(range(a.ndim - 2)) + (a.ndim - 1, a.ndim - 2)
    return transpose(a, axes)


def getitem(a: Tensor, index) -> Tensor:
    out = a.data[index]

    def backward(g: np.ndarray):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return make_op(out, (a,), backward, owns_data=not np.may_share_memory(out, a.data))


# 矩阵乘法


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul 需要至少二维的输入，得到 {a.shape} 和 {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul 维度不匹配: {a.shape} @ {b.shape}")
    batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    out_shape = batch + (a.shape[-2], b.shape[-1])
    tracker.reserve(int(np.prod(out_shape)) * np.result_type(a.dtype, b.dtype).itemsize)
    out = np.matmul(a.data, b.data)

    def backward(g: np.ndarray):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return make_op(out, (a, b), backward)
