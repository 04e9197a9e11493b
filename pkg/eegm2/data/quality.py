"""
数据质量检查

逐通道平稳性检验（ADF + KPSS）与同组窗口间频段功率稳定性。
"""

import warnings
from typing import Any, Dict, Tuple

import numpy as np
import pandas as pd
from statsmodels.tsa.stattools import adfuller, kpss

from .dataset import SignalBatch
from .synth import band_power


def check_stationarity(signal: np.ndarray,
                       alpha: float = 0.05,
                       method: str = "both",
                       max_points: int = 2048) -> Dict[str, Any]:
    """
    检验各通道的平稳性

    Args:
        signal: 记录 [C, n]
        alpha: 显著性水平
        method: 检验方法 ('adf', 'kpss', 'both')
        max_points: 每个通道最多使用的样本点数

    Returns:
        检验结果字典，channels 为逐通道结果，overall 为全部通道的综合判断
    """
    if method not in ("adf", "kpss", "both"):
        raise ValueError(f"未知的检验方法: {method}")
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 2:
        raise ValueError(f"signal 应为 [C, n]，得到 {signal.shape}")

    channels = []
    for c, series in enumerate(signal[:, :max_points]):
        result: Dict[str, Any] = {"channel": c}
        stationary = True
        if method in ("adf", "both"):
            # ADF检验 (原假设：存在单位根，即非平稳)
            adf_result = adfuller(series, autolag="AIC")
            result["adf"] = {
                "statistic": float(adf_result[0]),
                "p_value": float(adf_result[1]),
                "is_stationary": bool(adf_result[1] < alpha),
            }
            stationary &= result["adf"]["is_stationary"]
        if method in ("kpss", "both"):
            # KPSS检验 (原假设：平稳)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                kpss_result = kpss(series, regression="c")
            result["kpss"] = {
                "statistic": float(kpss_result[0]),
                "p_value": float(kpss_result[1]),
                "is_stationary": bool(kpss_result[1] > alpha),
            }
            stationary &= result["kpss"]["is_stationary"]
        result["is_stationary"] = bool(stationary)
        channels.append(result)

    n_stationary = sum(r["is_stationary"] for r in channels)
    return {
        "channels": channels,
        "overall": {
            "is_stationary": n_stationary == len(channels),
            "stationary_fraction": n_stationary / max(len(channels), 1),
            "interpretation": f"{n_stationary}/{len(channels)} 个通道平稳",
        },
    }


def band_power_stability(batch: SignalBatch, band: Tuple[float, float] = (8.0, 12.0)) -> pd.DataFrame:
    """
    按 (被试, 类别) 分组统计窗口频段功率

    每行给出组内窗口功率（通道平均）的均值、标准差与最大标准化偏差
    max|p - mean| / std。

    Returns:
        分组统计表
    """
    if batch.subjects is None:
        raise ValueError("数据批缺少被试信息")
    power = band_power(batch.x, batch.sampling_rate, band).mean(axis=1)
    frame = pd.DataFrame({
        "subject": batch.subjects.astype(str),
        "label": batch.y if batch.y is not None else -1,
        "power": power,
    })
    grouped = frame.groupby(["subject", "label"])["power"]
    stats = grouped.agg(["mean", "std", "count"]).reset_index()
    deviation = (frame["power"] - grouped.transform("mean")).abs() / grouped.transform("std").replace(0, np.nan)
    stats["max_z"] = deviation.groupby([frame["subject"], frame["label"]]).max().to_numpy()
    return stats
