"""
异常定义

工具包内所有可预期的错误都从 EEGM2Error 派生，同时继承对应的内置异常类型，
这样调用方既可以统一捕获，也可以按 ValueError / MemoryError 等常规方式处理。
"""

from typing import Optional


class EEGM2Error(Exception):
    """工具包基础异常"""


class ShapeError(EEGM2Error, ValueError):
    """张量形状不匹配"""


class ConfigError(EEGM2Error, ValueError):
    """配置不合法"""


class NonFiniteError(EEGM2Error, FloatingPointError):
    """计算过程中出现 NaN/Inf"""

    def __init__(self, message: str, position: Optional[int] = None):
        super().__init__(message)
        self.position = position


class OutOfMemoryError(EEGM2Error, MemoryError):
    """超出内存上限（基准测试中作为数据记录，而不是致命错误）"""

    def __init__(self, requested_bytes: int, live_bytes: int, cap_bytes: int):
        super().__init__(
            f"内存超出上限: 申请 {requested_bytes} 字节, "
            f"当前占用 {live_bytes} 字节, 上限 {cap_bytes} 字节"
        )
        self.requested_bytes = requested_bytes
        self.live_bytes = live_bytes
        self.cap_bytes = cap_bytes


class DivergenceError(EEGM2Error, RuntimeError):
    """训练发散"""


class DatasetError(EEGM2Error, ValueError):
    """数据集或记录不合法"""

    def __init__(self, message: str, record: Optional[str] = None):
        if record is not None:
            message = f"{message} (记录: {record})"
        super().__init__(message)
        self.record = record


class CheckpointError(EEGM2Error, ValueError):
    """检查点文件损坏或与当前配置不兼容"""
