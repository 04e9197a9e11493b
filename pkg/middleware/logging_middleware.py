"""
请求日志中间件

每个请求记录一行开始、一行结束；推理请求超过阈值时记 WARNING。
"""

import logging
import os
import time
import uuid
from typing import Callable, Optional

from fastapi import Request, Response
from starlette.middleware.base import BaseHTTPMiddleware

logger = logging.getLogger(__name__)

INFERENCE_PREFIX = "/api/v1/model"


class LoggingMiddleware(BaseHTTPMiddleware):
    """
    请求日志与计时

    响应头附带 X-Request-ID（沿用客户端传入的值）与 X-Process-Time。

    Args:
        app: ASGI 应用
        slow_seconds: 推理请求的慢请求阈值，默认取环境变量 EEGM2_SLOW_REQUEST_SECONDS 或 5 秒
    """

    def __init__(self, app, slow_seconds: Optional[float] = None):
        super().__init__(app)
        if slow_seconds is None:
            slow_seconds = float(os.getenv("EEGM2_SLOW_REQUEST_SECONDS", "5"))
        self.slow_seconds = slow_seconds

    async def dispatch(self, request: Request, call_next: Callable) -> Response:
        request_id = request.headers.get("X-Request-ID") or uuid.uuid4().hex[:8]
        request.state.request_id = request_id
        path = request.url.path
        client = request.client.host if request.client is not None else "unknown"
        logger.info("[%s] %s %s 来自 %s (%s 字节)", request_id, request.method, path, client,
                    request.headers.get("content-length", "0"))

        start = time.perf_counter()
        try:
            response = await call_next(request)
        except Exception as e:
            logger.error("[%s] %s 处理失败 %.3fs: %s: %s", request_id, path,
                         time.perf_counter() - start, type(e).__name__, e)
            raise

        elapsed = time.perf_counter() - start
        if path.startswith(INFERENCE_PREFIX) and elapsed > self.slow_seconds:
            logger.warning("[%s] 推理请求耗时 %.3fs，超过阈值 %.1fs", request_id, elapsed, self.slow_seconds)
        logger.info("[%s] 完成 %d (%.3fs)", request_id, response.status_code, elapsed)
        response.headers["X-Request-ID"] = request_id
        response.headers["X-Process-Time"] = f"{elapsed:.3f}"
        return response
