"""
EEGM2 推理服务

提供基于预训练检查点的 RESTful API：
- 信号重建与 ACMSE
- 统计表征提取
- 按预设计算参数量
"""

import logging
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from eegm2 import __version__
from eegm2.api import EEGM2Toolkit
from eegm2.logging_config import setup_logging
from middleware.error_handlers import setup_error_handlers
from middleware.logging_middleware import LoggingMiddleware
from models.schemas import HealthResponse
from routes import bench, model

setup_logging(os.getenv("EEGM2_LOG_LEVEL", "INFO"))
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """应用生命周期管理：启动时按 EEGM2_CHECKPOINT 载入模型"""
    toolkit = EEGM2Toolkit()
    checkpoint = os.getenv("EEGM2_CHECKPOINT")
    if checkpoint:
        try:
            toolkit.load_checkpoint(checkpoint)
            logger.info(f"已载入检查点: {checkpoint}")
        except (FileNotFoundError, ValueError) as e:
            logger.error(f"检查点载入失败: {e}")
    else:
        logger.warning("未设置 EEGM2_CHECKPOINT，推理接口将返回 404")
    app.state.toolkit = toolkit
    logger.info("EEGM2 推理服务启动")
    yield
    logger.info("EEGM2 推理服务关闭")


app = FastAPI(
    title="EEGM2 推理服务",
    description="多通道生理信号的重建与表征提取服务",
    version=__version__,
    docs_url="/docs",
    redoc_url="/redoc",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)
app.add_middleware(LoggingMiddleware)

setup_error_handlers(app)

app.include_router(model.router)
app.include_router(bench.router)


def _health(app_: FastAPI) -> HealthResponse:
    toolkit = getattr(app_.state, "toolkit", None)
    return HealthResponse(
        status="healthy",
        model_loaded=bool(toolkit is not None and toolkit.is_loaded),
        version=__version__,
    )


@app.get("/", response_model=HealthResponse)
async def root():
    """根路径"""
    return _health(app)


@app.get("/health", response_model=HealthResponse)
async def health_check():
    """健康检查"""
    return _health(app)
