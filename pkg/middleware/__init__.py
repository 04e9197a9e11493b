"""
中间件模块

错误处理与请求日志
"""

from .error_handlers import setup_error_handlers
from .logging_middleware import LoggingMiddleware

__all__ = ["setup_error_handlers", "LoggingMiddleware"]
