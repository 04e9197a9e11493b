"""
学习率调度
"""

import math

from ..config import OptimConfig


def _cosine(start: float, end: float, pct: float) -> float:
    return end + (start - end) / 2.0 * (1.0 + math.cos(math.pi * pct))


def warmup_steps(total_steps: int, warmup_frac: float) -> int:
    """上升段结束的步号 round(warmup_frac · total)，限制在 [1, total-1]"""
    return min(max(int(round(warmup_frac * total_steps)), 1), total_steps - 1)


def onecycle_lr(step: int, total_steps: int, config: OptimConfig) -> float:
    """
    OneCycle 学习率

    前 warmup_frac 的步数内从 max_lr/initial_lr_div 余弦上升到 max_lr，
    之后余弦衰减，最后一步恰好为 max_lr/final_lr_div。

    Args:
        step: 当前步号，0 <= step < total_steps
        total_steps: 总步数
        config: 优化器配置

    Returns:
        当前步的学习率
    """
    if total_steps < 1:
        raise ValueError(f"总步数必须 >= 1，得到 {total_steps}")
    if not 0 <= step < total_steps:
        raise ValueError(f"步号 {step} 超出范围 [0, {total_steps})")
    initial = config.max_lr / config.initial_lr_div
    final = config.max_lr / config.final_lr_div
    if total_steps == 1:
        return initial
    peak = warmup_steps(total_steps, config.warmup_frac)
    if step <= peak:
        return _cosine(initial, config.max_lr, step / peak)
    return _cosine(config.max_lr, final, (step - peak) / (total_steps - 1 - peak))


def learning_rate(step: int, total_steps: int, config: OptimConfig) -> float:
    """按配置选择调度方式；步号超出总步数时停在最后一步"""
    if config.schedule == "constant":
        return config.init_lr
    return onecycle_lr(min(step, total_steps - 1), total_steps, config)
