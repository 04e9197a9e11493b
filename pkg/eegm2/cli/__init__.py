"""命令行接口模块"""

from .main import app

__all__ = ["app"]
