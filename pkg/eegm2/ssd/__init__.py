"""
结构化状态空间模块
"""

from .blocks import AttentionBlock, Discretized, Mamba2Block, decay_factor, discretize
from .scan import scan_chunked, scan_chunked_log, scan_naive

__all__ = [
    "Mamba2Block", "AttentionBlock", "Discretized", "discretize", "decay_factor",
    "scan_naive", "scan_chunked", "scan_chunked_log",
]
