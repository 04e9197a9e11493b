"""
合成多通道数据

类别 0：粉红噪声背景；类别 1：粉红噪声 + 被试特有的 alpha 频段振荡。
每个被试有独立的增益、噪声水平、振荡频率、幅度和各通道相位，用来模拟被试间差异。
每个被试写两条记录（每个类别一条），记录由若干个连续窗口组成。
"""

import logging
import math
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from ..config import SynthConfig
from ..diffcore.serialization import save_tensor
from ..exceptions import ConfigError
from .manifest import DatasetManifest, RecordInfo

logger = logging.getLogger(__name__)


def pink_noise(rng: np.random.Generator, channels: int, n: int) -> np.ndarray:
    """1/f 功率谱噪声，每个通道归一化到单位标准差"""
    white = rng.standard_normal((channels, n))
    spectrum = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(n)
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    noise = np.fft.irfft(spectrum * scale, n=n, axis=-1)
    std = noise.std(axis=-1, keepdims=True)
    return noise / np.where(std > 0, std, 1.0)


def band_power(x: np.ndarray, fs: float, band: Tuple[float, float]) -> np.ndarray:
    """
    沿最后一维计算频段平均功率 |X_k|²/T

    Args:
        x: 信号 [..., T]
        fs: 采样率
        band: (下限, 上限) Hz，闭区间

    Returns:
        形状为 x.shape[:-1] 的功率
    """
    x = np.asarray(x, dtype=np.float64)
    length = x.shape[-1]
    power = np.abs(np.fft.rfft(x, axis=-1)) ** 2 / length
    freqs = np.fft.rfftfreq(length, d=1.0 / fs)
    in_band = (freqs >= band[0]) & (freqs <= band[1])
    if not in_band.any():
        raise ValueError(f"频段 {band} 内没有频点 (T={length}, fs={fs})")
    return power[..., in_band].mean(axis=-1)


def synth_generate(config: SynthConfig,
                   output_dir: Union[str, Path]) -> Tuple[Path, DatasetManifest]:
    """
    生成合成数据集并写入磁盘

    Args:
        config: 合成配置
        output_dir: 输出目录，写入 manifest.json 与每条记录一个载荷文件

    Returns:
        (清单路径, 清单)
    """
    if config.fs <= 2 * config.alpha_band[1]:
        raise ConfigError(
            f"采样率 {config.fs} Hz 不满足奈奎斯特条件，需大于 {2 * config.alpha_band[1]} Hz"
        )
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    length = config.window_len
    n_pos = math.ceil(config.windows_per_subject / 2)
    n_neg = config.windows_per_subject - n_pos
    t = np.arange(max(n_pos, n_neg) * length) / config.fs

    records = []
    for s in range(config.n_subjects):
        subject = f"sub{s:03d}"
        gain = rng.uniform(0.7, 1.3)
        noise_level = rng.uniform(0.8, 1.2)
        freq = rng.uniform(*config.alpha_band)
        amplitude = config.alpha_amplitude * rng.uniform(0.6, 1.4)
        spatial = rng.uniform(0.5, 1.0, size=config.channels)
        phase = rng.uniform(0.0, 2 * np.pi, size=config.channels)
        for label, n_windows in ((0, n_neg), (1, n_pos)):
            if n_windows == 0:
                continue
            n = n_windows * length
            signal = noise_level * pink_noise(rng, config.channels, n)
            if label == 1:
                signal = signal + amplitude * spatial[:, None] * np.sin(
                    2 * np.pi * freq * t[None, :n] + phase[:, None]
                )
            data = (gain * signal).astype(np.float32)
            name = f"{subject}_c{label}.tsr"
            save_tensor(output_dir / name, data)
            records.append(RecordInfo(file=name, subject_id=subject, label=label, n_samples=n))

    manifest = DatasetManifest(
        name=config.name,
        sampling_rate_hz=config.fs,
        channels=config.channels,
        records=records,
    )
    path = manifest.save(output_dir / "manifest.json")
    logger.info("合成数据集已生成: %s (%d 个被试, %d 条记录)", path, config.n_subjects, len(records))
    return path, manifest
