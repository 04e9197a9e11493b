"""
信号与实验结果可视化

重建对比、幅度谱、损失曲线和基准扩展曲线（对数坐标）。
"""

import logging
import platform
from typing import List, Optional, Sequence, Tuple

import matplotlib.font_manager as fm
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns

logger = logging.getLogger(__name__)


def setup_chinese_fonts() -> str:
    """
    设置中文字体支持

    根据不同操作系统自动选择合适的中文字体
    """
    system = platform.system()
    if system == "Windows":
        font_candidates = ['Microsoft YaHei', 'SimHei', 'SimSun']
    elif system == "Darwin":  # macOS
        font_candidates = ['PingFang SC', 'Hiragino Sans GB', 'Arial Unicode MS']
    else:  # Linux
        font_candidates = ['WenQuanYi Micro Hei', 'Noto Sans CJK SC', 'Source Han Sans SC', 'DejaVu Sans']

    available_fonts = {f.name for f in fm.fontManager.ttflist}
    selected_font = next((f for f in font_candidates if f in available_fonts), None)
    if selected_font is None:
        selected_font = 'DejaVu Sans'
        logger.warning("未找到合适的中文字体，使用默认字体 %s", selected_font)

    plt.rcParams['font.sans-serif'] = [selected_font] + font_candidates
    plt.rcParams['axes.unicode_minus'] = False
    plt.rcParams['font.family'] = 'sans-serif'
    return selected_font


class SignalPlotter:
    """多通道信号与实验结果可视化器"""

    def __init__(self, figsize: Tuple[int, int] = (12, 8), style: str = 'seaborn-v0_8'):
        """
        初始化可视化器

        Args:
            figsize: 图形大小
            style: 绘图风格
        """
        self.figsize = figsize
        try:
            plt.style.use(style)
        except OSError:
            plt.style.use('default')
        sns.set_palette("husl")
        setup_chinese_fonts()

    @staticmethod
    def _finish(fig: plt.Figure, save_path: Optional[str]) -> plt.Figure:
        fig.tight_layout()
        if save_path:
            fig.savefig(save_path, dpi=150, bbox_inches='tight')
        return fig

    def plot_reconstruction(self,
                            x: np.ndarray,
                            x_hat: np.ndarray,
                            fs: float = 1.0,
                            channels: Optional[Sequence[int]] = None,
                            title: str = "重建对比",
                            save_path: Optional[str] = None) -> plt.Figure:
        """
        逐通道叠加原始信号与重建信号

        Args:
            x: 原始信号 [C, T]
            x_hat: 重建信号 [C, T]
            fs: 采样率，用于横轴秒数
            channels: 要画的通道，默认前 4 个
            title: 图表标题
            save_path: 保存路径

        Returns:
            matplotlib图形对象
        """
        x, x_hat = np.asarray(x), np.asarray(x_hat)
        channels = list(channels if channels is not None else range(min(4, x.shape[0])))
        t = np.arange(x.shape[-1]) / fs
        fig, axes = plt.subplots(len(channels), 1, figsize=self.figsize, sharex=True, squeeze=False)
        for ax, c in zip(axes[:, 0], channels):
            ax.plot(t, x[c], linewidth=1.0, label='原始')
            ax.plot(t, x_hat[c], linewidth=1.0, alpha=0.8, label='重建')
            ax.set_ylabel(f'ch{c}')
            ax.grid(True, alpha=0.3)
        axes[0, 0].legend(loc='upper right')
        axes[-1, 0].set_xlabel('时间 (s)')
        fig.suptitle(title, fontsize=14, fontweight='bold')
        return self._finish(fig, save_path)

    def plot_spectrum(self,
                      x: np.ndarray,
                      x_hat: np.ndarray,
                      fs: float = 1.0,
                      title: str = "幅度谱对比",
                      save_path: Optional[str] = None) -> plt.Figure:
        """通道平均的 rFFT 幅度谱（对数纵轴）"""
        x, x_hat = np.asarray(x, dtype=np.float64), np.asarray(x_hat, dtype=np.float64)
        freqs = np.fft.rfftfreq(x.shape[-1], d=1.0 / fs)
        fig, ax = plt.subplots(figsize=self.figsize)
        ax.semilogy(freqs, np.abs(np.fft.rfft(x, axis=-1)).mean(axis=0), label='原始')
        ax.semilogy(freqs, np.abs(np.fft.rfft(x_hat, axis=-1)).mean(axis=0), label='重建', alpha=0.8)
        ax.set_xlabel('频率 (Hz)')
        ax.set_ylabel('幅度')
        ax.set_title(title, fontsize=14, fontweight='bold')
        ax.grid(True, alpha=0.3)
        ax.legend()
        return self._finish(fig, save_path)

    def plot_loss_curve(self,
                        history: pd.DataFrame,
                        title: str = "损失曲线",
                        save_path: Optional[str] = None) -> plt.Figure:
        """训练/验证损失随 epoch 的变化"""
        fig, ax = plt.subplots(figsize=self.figsize)
        ax.plot(history['epoch'], history['train_loss'], marker='o', label='训练损失')
        if 'val_loss' in history and history['val_loss'].notna().any():
            ax.plot(history['epoch'], history['val_loss'], marker='s', label='验证损失')
        ax.set_xlabel('epoch')
        ax.set_ylabel('损失')
        ax.set_yscale('log')
        ax.set_title(title, fontsize=14, fontweight='bold')
        ax.grid(True, alpha=0.3)
        ax.legend()
        return self._finish(fig, save_path)

    def plot_scaling(self,
                     records: pd.DataFrame,
                     metric: str = "peak_mem_bytes",
                     title: Optional[str] = None,
                     save_path: Optional[str] = None) -> plt.Figure:
        """
        各变体的指标随序列长度变化（对数-对数坐标），oom 点不画

        Args:
            records: 基准结果表（bench.csv 的列）
            metric: 列名，如 peak_mem_bytes / activation_bytes / samples_per_ms
        """
        frame = records[~records['oom'].astype(bool)]
        fig, ax = plt.subplots(figsize=self.figsize)
        sns.lineplot(data=frame, x='seq_len', y=metric, hue='variant', marker='o', ax=ax)
        oom = records[records['oom'].astype(bool)]
        for variant, group in oom.groupby('variant'):
            ax.axvline(group['seq_len'].min(), linestyle='--', alpha=0.5)
            ax.text(group['seq_len'].min(), ax.get_ylim()[1], f'{variant} OOM',
                    rotation=90, va='top', fontsize=9)
        ax.set_xscale('log')
        ax.set_yscale('log')
        ax.set_xlabel('序列长度')
        ax.set_ylabel(metric)
        ax.set_title(title or f'{metric} 随序列长度的变化', fontsize=14, fontweight='bold')
        ax.grid(True, which='both', alpha=0.3)
        return self._finish(fig, save_path)

    def plot_comparison(self,
                        table: pd.DataFrame,
                        columns: Optional[List[str]] = None,
                        title: str = "变体比较",
                        save_path: Optional[str] = None) -> plt.Figure:
        """按变体画若干指标的柱状图"""
        columns = columns or [c for c in table.columns if c != 'variant']
        fig, axes = plt.subplots(1, len(columns), figsize=self.figsize, squeeze=False)
        for ax, column in zip(axes[0], columns):
            sns.barplot(data=table, x='variant', y=column, ax=ax)
            ax.set_title(column)
            ax.grid(True, axis='y', alpha=0.3)
        fig.suptitle(title, fontsize=14, fontweight='bold')
        return self._finish(fig, save_path)
