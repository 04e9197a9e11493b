"""
梯度检验

用中心差分核对反向模式梯度。误差定义为
|解析梯度 - 中心差分| / max(1, |中心差分|)，取所有被检查元素上的最大值。
"""

import logging
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import NonFiniteError
from .tensor import GradTape, Parameter, Tensor

logger = logging.getLogger(__name__)

ParamSpec = Union[Sequence[Parameter], Sequence[Tuple[str, Parameter]]]


def _evaluate(f: Callable[[], Tensor]) -> float:
    value = f()
    if value.size != 1:
        raise ValueError(f"梯度检验要求 f 返回标量，得到形状 {value.shape}")
    result = value.item()
    if not np.isfinite(result):
        raise NonFiniteError(f"被检验函数返回非有限值: {result}")
    return result


def _named(params: ParamSpec) -> Sequence[Tuple[str, Parameter]]:
    named = []
    for i, item in enumerate(params):
        if isinstance(item, tuple):
            named.append(item)
        else:
            named.append((f"{item.name or 'param'}[{i}]", item))
    return named


def grad_check_report(f: Callable[[], Tensor],
                      params: ParamSpec,
                      eps: float = 1e-6,
                      n_probe: Optional[int] = None,
                      seed: int = 0) -> Dict[str, float]:
    """
    逐参数组的梯度检验

    Args:
        f: 无参数的标量函数，每次调用都重新计算前向
        params: 参数列表，或 (名称, 参数) 列表
        eps: 差分步长
        n_probe: 每个参数抽查的元素个数，None 表示检查全部元素
        seed: 抽查用的随机种子

    Returns:
        参数名到最大相对误差的映射
    """
    named = _named(params)
    with GradTape() as tape:
        value = f()
    if not np.all(np.isfinite(value.data)):
        raise NonFiniteError("被检验函数返回非有限值")
    grads = tape.gradient(value, [p for _, p in named])

    rng = np.random.default_rng(seed)
    report: Dict[str, float] = {}
    for (name, param), grad in zip(named, grads):
        flat = param.data.reshape(-1)
        indices = np.arange(flat.size)
        if n_probe is not None and n_probe < flat.size:
            indices = np.sort(rng.choice(flat.size, size=n_probe, replace=False))
        worst = 0.0
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + eps
            plus = _evaluate(f)
            flat[idx] = original - eps
            minus = _evaluate(f)
            flat[idx] = original
            central = (plus - minus) / (2 * eps)
            analytic = float(grad.reshape(-1)[idx])
            worst = max(worst, abs(analytic - central) / max(1.0, abs(central)))
        report[name] = worst
        logger.debug("梯度检验 %s: 最大相对误差 %.3e (%d 个元素)", name, worst, len(indices))
    return report


def grad_check(f: Callable[[], Tensor],
               params: ParamSpec,
               eps: float = 1e-6,
               n_probe: Optional[int] = None,
               seed: int = 0) -> float:
    """返回所有参数上的最大相对误差，参数说明见 grad_check_report"""
    report = grad_check_report(f, params, eps=eps, n_probe=n_probe, seed=seed)
    return max(report.values(), default=0.0)
