"""
日志配置

CLI 与 HTTP 服务共用的日志初始化：rich 控制台输出 + 可选的文件输出。
"""

import logging
import os
from pathlib import Path
from typing import Optional, Union

from rich.logging import RichHandler

LOG_FORMAT = (
    "%(asctime)s - %(name)s - %(levelname)s - "
    "%(filename)s:%(lineno)d - %(message)s"
)


def setup_logging(level: Optional[Union[int, str]] = None,
                  log_file: Optional[Union[str, Path]] = None) -> None:
    """
    设置日志配置

    Args:
        level: 日志级别，默认读取环境变量 EEGM2_LOG_LEVEL，缺省为 INFO
        log_file: 日志文件路径，为 None 时只输出到控制台
    """
    if level is None:
        level = os.getenv("EEGM2_LOG_LEVEL", "INFO").upper()

    handlers = [RichHandler(rich_tracebacks=True, show_path=False)]
    if log_file is not None:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handlers.append(file_handler)

    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=handlers,
        force=True,
    )

    # 第三方库保持安静
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)
