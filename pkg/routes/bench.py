"""
基准相关路由
"""

import logging

from fastapi import APIRouter

from eegm2.arch.factory import analytic_param_count
from eegm2.config import ArchConfig
from models.schemas import ParamCountRequest, ParamCountResponse

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1/bench", tags=["基准"])


@router.post("/params", response_model=ParamCountResponse)
def param_count(payload: ParamCountRequest):
    """不构建模型，直接按预设计算参数量"""
    config = ArchConfig.preset(payload.preset, payload.in_channels, payload.variant)
    count = analytic_param_count(config)
    logger.info(f"参数量: {payload.preset}/{payload.variant.value} C={payload.in_channels} → {count}")
    return ParamCountResponse(
        preset=payload.preset,
        variant=payload.variant.value,
        in_channels=payload.in_channels,
        param_count=count,
    )
