"""
全局错误处理器

工具包异常按类型映射到状态码；响应体统一为 {error, detail, timestamp, path}。
"""

import logging
import os
import traceback
from datetime import datetime
from typing import Any, Dict, List, Tuple, Type

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from eegm2.exceptions import (
    CheckpointError,
    ConfigError,
    NonFiniteError,
    OutOfMemoryError,
    ShapeError,
)

logger = logging.getLogger(__name__)

# 子类排在父类之前；Starlette 按异常类的 MRO 选择处理器
ERROR_TABLE: List[Tuple[Type[Exception], int, str]] = [
    (ShapeError, 400, "形状错误"),
    (ConfigError, 400, "配置错误"),
    (NonFiniteError, 400, "数值错误"),
    (CheckpointError, 500, "检查点错误"),
    (OutOfMemoryError, 507, "内存不足"),
    (ValueError, 400, "参数错误"),
    (FileNotFoundError, 404, "未找到"),
]


def _body(request: Request, error: str, detail: Any) -> Dict[str, Any]:
    return {
        "error": error,
        "detail": detail,
        "timestamp": datetime.now().isoformat(),
        "path": str(request.url.path),
    }


def _is_development() -> bool:
    return os.getenv("ENVIRONMENT", "development").lower() == "development"


def _register(app: FastAPI, exc_type: Type[Exception], status: int, label: str) -> None:
    async def handler(request: Request, exc: Exception):
        log = logger.warning if status < 500 else logger.error
        log("%s (%d): %s - %s", label, status, exc, request.url.path)
        return JSONResponse(status_code=status, content=_body(request, label, str(exc)))

    app.add_exception_handler(exc_type, handler)


def setup_error_handlers(app: FastAPI) -> None:
    """设置全局错误处理器"""
    for exc_type, status, label in ERROR_TABLE:
        _register(app, exc_type, status, label)

    @app.exception_handler(StarletteHTTPException)
    async def http_exception_handler(request: Request, exc: StarletteHTTPException):
        logger.warning("HTTP异常: %d - %s - %s", exc.status_code, exc.detail, request.url.path)
        return JSONResponse(status_code=exc.status_code, content=_body(request, "HTTP错误", exc.detail))

    @app.exception_handler(RequestValidationError)
    async def validation_exception_handler(request: Request, exc: RequestValidationError):
        """请求体校验失败，逐字段列出原因"""
        logger.warning("请求验证错误: %s - %s", exc.errors(), request.url.path)
        content = _body(request, "请求验证失败", "请求参数不符合要求")
        content["validation_errors"] = [
            {"field": " -> ".join(str(loc) for loc in e["loc"]), "message": e["msg"], "type": e["type"]}
            for e in exc.errors()
        ]
        return JSONResponse(status_code=422, content=content)

    @app.exception_handler(Exception)
    async def general_exception_handler(request: Request, exc: Exception):
        """未预期的异常；生产环境隐藏细节"""
        logger.error("未处理的异常: %s: %s - %s\n%s", type(exc).__name__, exc, request.url.path,
                     traceback.format_exc())
        if not _is_development():
            return JSONResponse(status_code=500,
                                content=_body(request, "内部服务器错误", "服务器内部错误，请稍后重试"))
        content = _body(request, "内部服务器错误", f"{type(exc).__name__}: {exc}")
        content["traceback"] = traceback.format_exc()
        return JSONResponse(status_code=500, content=content)
