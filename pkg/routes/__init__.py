"""
API路由模块
"""

from . import bench, model

__all__ = ["bench", "model"]
