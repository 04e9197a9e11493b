"""
可视化模块
"""

from .plotter import SignalPlotter, setup_chinese_fonts

__all__ = ["SignalPlotter", "setup_chinese_fonts"]
