"""
模块与参数层

Module 按属性赋值顺序登记参数与子模块，参数名采用点号路径（如 "encoder.stage1.proj.weight"）。
前向钩子在 forward 返回之后调用，只能观察结果，不能替换结果。
"""

import hashlib
import itertools
from collections import OrderedDict
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import CheckpointError
from . import ops
from .tensor import Parameter, Tensor, resolve_dtype

ForwardHook = Callable[["Module", Tuple[Any, ...], Any], None]

_hook_ids = itertools.count()


class HookHandle:
    """前向钩子句柄，调用 remove() 注销"""

    def __init__(self, hooks: Dict[int, ForwardHook], hook_id: int):
        self._hooks = hooks
        self.id = hook_id

    def remove(self) -> None:
        self._hooks.pop(self.id, None)

    def __enter__(self) -> "HookHandle":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.remove()


class Module:
    """可组合的网络模块基类"""

    def __init__(self):
        object.__setattr__(self, "_parameters", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "_forward_hooks", OrderedDict())

    def __setattr__(self, name: str, value: Any) -> None:
        params = self.__dict__.get("_parameters")
        if params is None:
            raise RuntimeError("子类必须先调用 Module.__init__()")
        if isinstance(value, Parameter):
            self._modules.pop(name, None)
            params[name] = value
        elif isinstance(value, Module):
            params.pop(name, None)
            self._modules[name] = value
        else:
            object.__setattr__(self, name, value)

    def __getattr__(self, name: str) -> Any:
        d = self.__dict__
        if "_parameters" in d and name in d["_parameters"]:
            return d["_parameters"][name]
        if "_modules" in d and name in d["_modules"]:
            return d["_modules"][name]
        raise AttributeError(f"'{type(self).__name__}' 没有属性 '{name}'")

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        output = self.forward(*args, **kwargs)
        for hook in list(self._forward_hooks.values()):
            hook(self, args, output)
        return output

    def register_forward_hook(self, hook: ForwardHook) -> HookHandle:
        hook_id = next(_hook_ids)
        self._forward_hooks[hook_id] = hook
        return HookHandle(self._forward_hooks, hook_id)

    # 遍历

    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self._modules.items():
            yield from child.named_modules(f"{prefix}.{name}" if prefix else name)

    def get_submodule(self, path: str) -> "Module":
        modules = dict(self.named_modules())
        if path not in modules:
            raise KeyError(path)
        return modules[path]

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, param in self._parameters.items():
            yield (f"{prefix}.{name}" if prefix else name), param
        for name, child in self._modules.items():
            yield from child.named_parameters(f"{prefix}.{name}" if prefix else name)

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def trainable_parameters(self) -> List[Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    def num_parameters(self, trainable_only: bool = False) -> int:
        params = self.trainable_parameters() if trainable_only else self.parameters()
        return int(sum(p.size for p in params))

    # 状态

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        """
        载入参数

        Args:
            state: 参数名到数组的映射
            strict: 为 True 时要求参数名集合完全一致
        """
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if missing or unexpected:
                raise CheckpointError(f"参数名不匹配: 缺少 {missing}, 多余 {unexpected}")
        for name, value in state.items():
            if name not in own:
                continue
            param = own[name]
            value = np.asarray(value)
            if value.shape != param.shape:
                raise CheckpointError(
                    f"参数 {name} 形状不匹配: 检查点 {value.shape}, 模型 {param.shape}"
                )
            param.data[...] = value.astype(param.dtype, copy=False)

    def astype(self, dtype: Union[str, np.dtype]) -> "Module":
        """把全部参数转换为指定精度（原地替换参数对象）"""
        target = resolve_dtype(dtype)
        for _, module in self.named_modules():
            for name, param in list(module._parameters.items()):
                if param.dtype == target:
                    continue
                converted = Parameter(param.data.astype(target), name=param.name)
                converted.requires_grad = param.requires_grad
                module._parameters[name] = converted
        return self

    def freeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = False
        return self

    def unfreeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = True
        return self

    def param_hash(self) -> str:
        """参数内容的 SHA-256 摘要，用于检查参数是否被修改"""
        digest = hashlib.sha256()
        for name, p in self.named_parameters():
            digest.update(name.encode("utf-8"))
            digest.update(str(p.dtype).encode("ascii"))
            digest.update(np.ascontiguousarray(p.data).tobytes())
        return digest.hexdigest()

    @property
    def dtype(self) -> np.dtype:
        params = self.parameters()
        return params[0].dtype if params else np.dtype(np.float64)


def _uniform(rng: np.random.Generator, bound: float, shape: Tuple[int, ...],
             dtype: np.dtype) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Linear(Module):
    """沿最后一维的线性层"""

    def __init__(self, d_in: int, d_out: int, bias: bool = True,
                 rng: Optional[np.random.Generator] = None,
                 dtype: Union[str, np.dtype] = "float32",
                 zero_init: bool = False):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        dtype = resolve_dtype(dtype)
        self.d_in = d_in
        self.d_out = d_out
        bound = 1.0 / np.sqrt(d_in)
        if zero_init:
            self.weight = Parameter(np.zeros((d_out, d_in), dtype=dtype), name="weight")
        else:
            self.weight = Parameter(_uniform(rng, bound, (d_out, d_in), dtype), name="weight")
        self.has_bias = bias
        if bias:
            self.bias = Parameter(
                np.zeros(d_out, dtype=dtype) if zero_init else _uniform(rng, bound, (d_out,), dtype),
                name="bias",
            )

    def forward(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias if self.has_bias else None)


class Conv1d(Module):
    """'same' 填充的一维卷积，输入输出均为 [B, C, T]"""

    def __init__(self, c_in: int, c_out: int, kernel_size: int, bias: bool = True,
                 rng: Optional[np.random.Generator] = None,
                 dtype: Union[str, np.dtype] = "float32"):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        dtype = resolve_dtype(dtype)
        self.c_in = c_in
        self.c_out = c_out
        self.kernel_size = kernel_size
        bound = 1.0 / np.sqrt(c_in * kernel_size)
        self.weight = Parameter(_uniform(rng, bound, (c_out, c_in, kernel_size), dtype), name="weight")
        self.has_bias = bias
        if bias:
            self.bias = Parameter(_uniform(rng, bound, (c_out,), dtype), name="bias")

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.weight, self.bias if self.has_bias else None)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5, dtype: Union[str, np.dtype] = "float32"):
        super().__init__()
        dtype = resolve_dtype(dtype)
        self.eps = eps
        self.gamma = Parameter(np.ones(d, dtype=dtype), name="gamma")
        self.beta = Parameter(np.zeros(d, dtype=dtype), name="beta")

    def forward(self, x: Tensor) -> Tensor:
        return ops.layernorm(x, self.gamma, self.beta, self.eps)


class MLP(Module):
    """全连接网络，隐藏层之间使用 SiLU"""

    def __init__(self, d_in: int, hidden: Sequence[int], d_out: int,
                 rng: Optional[np.random.Generator] = None,
                 dtype: Union[str, np.dtype] = "float32"):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        widths = [d_in, *hidden, d_out]
        self.n_layers = len(widths) - 1
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            setattr(self, f"fc{i}", Linear(a, b, rng=rng, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        for i in range(self.n_layers):
            x = getattr(self, f"fc{i}")(x)
            if i < self.n_layers - 1:
                x = ops.silu(x)
        return x
