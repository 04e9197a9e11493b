"""
推理基准测试

在引擎的内存记账器上测量单次前向的峰值内存，并用单调时钟测量推理速度，
按 (变体, 序列长度) 的笛卡尔积扫描，结果写成 CSV 和元数据 JSON。
"""

import gc
import json
import logging
import platform
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm

from ..arch.factory import build_variant
from ..arch.model import EEGM2
from ..config import ArchConfig, BenchConfig, LossConfig, OptimConfig, VariantId
from ..data.dataset import SignalBatch
from ..diffcore.memory import tracker
from ..diffcore.nn import Module
from ..exceptions import ConfigError, OutOfMemoryError
from ..train.pretrain import Pretrainer

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["variant", "seq_len", "peak_mem_bytes", "activation_bytes",
               "samples_per_ms", "param_count", "oom"]
METRICS = {
    "peak_mem": "peak_mem_bytes",
    "activation_mem": "activation_bytes",
    "speed": "samples_per_ms",
}
PRESETS = ("full", "light", "tiny")


@dataclass
class BenchRecord:
    """一个 (变体, 序列长度) 的测量结果"""
    variant: str
    seq_len: int
    peak_mem_bytes: int
    activation_bytes: int
    samples_per_ms: float
    param_count: int
    oom: bool = False


@dataclass
class MemoryMeasurement:
    peak_bytes: int
    activation_bytes: int
    oom: bool = False


def count_params(model: Module) -> int:
    """可学习标量参数总数"""
    return model.num_parameters()


def resolve_variant(name: str, in_channels: int = 16) -> ArchConfig:
    """
    把基准测试中的变体名解析为结构配置

    'full' / 'light' / 'tiny' 为预设；'s1'..'s5' 为 full 预设上的消融变体；
    'light:s5' 这样的写法指定预设和变体。
    """
    preset, _, variant = name.lower().partition(":")
    if not variant and preset not in PRESETS:
        preset, variant = "full", preset
    if preset not in PRESETS:
        raise ConfigError(f"未知预设: {preset}")
    try:
        return ArchConfig.preset(preset, in_channels=in_channels, variant=VariantId(variant or "full"))
    except ValueError as e:
        raise ConfigError(f"未知变体: {name}") from e


def _input(model: EEGM2, seq_len: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((1, model.config.in_channels, seq_len)).astype(model.dtype)


def measure_peak_memory(model: EEGM2, seq_len: int,
                        cap_bytes: Optional[int] = None, seed: int = 0,
                        batch_size: int = 1) -> MemoryMeasurement:
    """
    单次前向（不记录梯度）的存活字节高水位

    前向只计算一个窗口，激活按 batch_size 个窗口记账，参数只计一份。
    超出上限时返回 oom=True，不抛出异常；超限的注意力矩阵在分配之前就被拦下。

    Returns:
        MemoryMeasurement，activation_bytes 为高水位减去前向之前的存活字节数
    """
    x = _input(model, seq_len, seed)
    gc.collect()
    before = tracker.live_bytes
    try:
        with tracker.measure(cap_bytes, batch_scale=batch_size) as t:
            out = model(x)
            peak = t.peak_bytes
        del out
    except OutOfMemoryError as e:
        logger.warning("EEGM2-%s 在 T=%d 时内存超出上限: %s", model.config.variant.value, seq_len, str(e))
        return MemoryMeasurement(peak_bytes=0, activation_bytes=0, oom=True)
    return MemoryMeasurement(peak_bytes=peak, activation_bytes=peak - before)


def time_forward(model: EEGM2, seq_len: int, warmup: int = 15, runs: int = 10,
                 cap_bytes: Optional[int] = None, seed: int = 0,
                 clock: Callable[[], float] = time.perf_counter) -> List[float]:
    """预热后逐次计时，返回每次计时运行的耗时（毫秒）"""
    if runs < 1:
        raise ValueError(f"计时次数必须 >= 1，得到 {runs}")
    x = _input(model, seq_len, seed)
    latencies: List[float] = []
    with tracker.measure(cap_bytes):
        for _ in range(warmup):
            model(x)
        for _ in range(runs):
            start = clock()
            model(x)
            latencies.append((clock() - start) * 1000.0)
    return latencies


def measure_speed(model: EEGM2, seq_len: int, warmup: int = 15, runs: int = 10,
                  cap_bytes: Optional[int] = None, seed: int = 0) -> float:
    """
    推理速度（样本/毫秒）

    批大小为 1，取计时运行平均耗时的倒数；预热运行不计入。
    """
    latencies = time_forward(model, seq_len, warmup, runs, cap_bytes, seed)
    return 1.0 / max(float(np.mean(latencies)), 1e-9)


def bench_variant(name: str, seq_lens: Sequence[int], config: BenchConfig,
                  seed: int = 0) -> List[BenchRecord]:
    """对单个变体扫描全部序列长度"""
    model = build_variant(resolve_variant(name, config.in_channels), seed=seed, dtype=config.dtype)
    params = count_params(model)
    records = []
    for seq_len in seq_lens:
        memory = measure_peak_memory(model, seq_len, config.cap_bytes, seed, config.memory_batch_size)
        speed = 0.0
        oom = memory.oom
        if not oom:
            try:
                speed = measure_speed(model, seq_len, config.warmup, config.runs, config.cap_bytes, seed)
            except OutOfMemoryError as e:
                logger.warning("EEGM2-%s 在 T=%d 计时时内存超出上限: %s", name, seq_len, str(e))
                oom = True
        record = BenchRecord(name, seq_len, memory.peak_bytes, memory.activation_bytes,
                             speed, params, oom)
        logger.info("%s T=%d: peak=%d B, speed=%.4f samples/ms%s", name, seq_len,
                    record.peak_mem_bytes, record.samples_per_ms, " (OOM)" if oom else "")
        records.append(record)
    return records


def sweep(variants: Optional[Sequence[str]] = None,
          seq_lens: Optional[Sequence[int]] = None,
          config: Optional[BenchConfig] = None,
          seed: int = 0,
          progress: Optional[Callable[[str, int], None]] = None) -> List[BenchRecord]:
    """
    变体 × 序列长度 全组合扫描，单点超内存记为 oom 并继续

    Args:
        variants: 变体名列表，默认取 config.variants
        seq_lens: 序列长度列表，默认取 config.seq_lens
        config: 基准配置
        seed: 输入与初始化种子
        progress: 每个变体完成后的回调 (变体名, 已完成记录数)

    Returns:
        BenchRecord 列表
    """
    config = config or BenchConfig()
    variants = list(variants or config.variants)
    seq_lens = sorted(seq_lens or config.seq_lens)
    records: List[BenchRecord] = []
    for name in variants:
        records.extend(bench_variant(name, seq_lens, config, seed))
        if progress is not None:
            progress(name, len(records))
    return records


def records_frame(records: Sequence[BenchRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in records], columns=CSV_COLUMNS)


def write_sweep(records: Sequence[BenchRecord], output_dir: Union[str, Path],
                config: Optional[BenchConfig] = None, seed: int = 0,
                partial: bool = False) -> Tuple[Path, Path]:
    """写出 bench.csv 与 bench_metadata.json"""
    from .. import __version__

    config = config or BenchConfig()
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = output_dir / "bench.csv"
    records_frame(records).to_csv(csv_path, index=False)
    meta_path = output_dir / "bench_metadata.json"
    metadata = {
        "engine_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "dtype": config.dtype,
        "cap_bytes": config.cap_bytes,
        "seed": seed,
        "batch_size": 1,
        "memory_batch_size": config.memory_batch_size,
        "warmup": config.warmup,
        "runs": config.runs,
        "partial": partial,
    }
    meta_path.write_text(json.dumps(metadata, ensure_ascii=False, indent=2), encoding="utf-8")
    logger.info("基准结果已写入 %s", csv_path)
    return csv_path, meta_path


def fit_loglog(lengths: Sequence[float], values: Sequence[float]) -> float:
    """log(value) 对 log(length) 的最小二乘斜率"""
    x = np.log(np.asarray(lengths, dtype=np.float64))
    y = np.log(np.asarray(values, dtype=np.float64))
    result = sm.OLS(y, sm.add_constant(x)).fit()
    return float(result.params[1])


def loglog_slope(records: Sequence[BenchRecord], metric: str = "peak_mem",
                 min_points: int = 4) -> float:
    """
    单个变体的对数-对数斜率

    只使用非 oom 点，并取最大长度往下一个数量级内的点；该区间不足 min_points 个点时，
    改用最大的 min_points 个长度。

    Args:
        records: 同一变体的记录
        metric: 'peak_mem'、'activation_mem' 或 'speed'
        min_points: 最少点数

    Returns:
        斜率
    """
    if metric not in METRICS:
        raise ValueError(f"未知指标: {metric}，可选 {sorted(METRICS)}")
    variants = {r.variant for r in records}
    if len(variants) > 1:
        raise ValueError(f"记录来自多个变体: {sorted(variants)}")
    column = METRICS[metric]
    points = sorted((r.seq_len, float(getattr(r, column))) for r in records if not r.oom)
    points = [(n, v) for n, v in points if v > 0]
    if len(points) < min_points:
        raise ValueError(f"拟合至少需要 {min_points} 个有效点，得到 {len(points)}")
    largest = points[-1][0]
    decade = [(n, v) for n, v in points if n >= largest / 10]
    if len(decade) < min_points:
        decade = points[-min_points:]
    lengths, values = zip(*decade)
    return fit_loglog(lengths, values)


def epoch_time_comparison(variants: Sequence[str], batch: SignalBatch,
                          optim: Optional[OptimConfig] = None,
                          loss: Optional[LossConfig] = None,
                          preset: str = "light", seed: int = 0,
                          dtype: str = "float32") -> pd.DataFrame:
    """
    各变体在同一数据上的每 epoch 训练耗时

    Returns:
        列为 variant、param_count、seconds_per_epoch、final_train_loss 的表
    """
    optim = optim or OptimConfig(epochs=1)
    rows: List[Dict[str, object]] = []
    for name in variants:
        arch = ArchConfig.preset(preset, in_channels=batch.channels, variant=name)
        model = build_variant(arch, seed=seed, dtype=dtype)
        trainer = Pretrainer(model, optim, loss or LossConfig.for_variant(name), seed=seed)
        result = trainer.fit(batch, val=batch.subset([]))
        rows.append({
            "variant": arch.variant.value,
            "param_count": count_params(model),
            "seconds_per_epoch": result.mean_epoch_seconds,
            "final_train_loss": result.history[-1]["train_loss"],
        })
    return pd.DataFrame(rows)
