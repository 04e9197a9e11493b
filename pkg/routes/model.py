"""
模型推理路由

重建、表征提取与模型信息
"""

import logging

import numpy as np
from fastapi import APIRouter, Depends, Request

from eegm2.api import EEGM2Toolkit
from eegm2.representation.stats import STAT_NAMES
from models.schemas import (
    ModelInfoResponse,
    ReconstructRequest,
    ReconstructResponse,
    RepresentRequest,
    RepresentResponse,
)

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/api/v1/model", tags=["模型推理"])


def get_toolkit(request: Request) -> EEGM2Toolkit:
    """取出应用持有的工具包，未载入模型时报 404"""
    toolkit: EEGM2Toolkit = request.app.state.toolkit
    if not toolkit.is_loaded:
        raise FileNotFoundError("服务未载入检查点，请设置 EEGM2_CHECKPOINT 后重启")
    return toolkit


@router.get("/info", response_model=ModelInfoResponse)
def model_info(toolkit: EEGM2Toolkit = Depends(get_toolkit)):
    """获取当前模型信息"""
    summary = toolkit.summary()
    summary.pop("modules", None)
    return ModelInfoResponse(**summary)


@router.post("/reconstruct", response_model=ReconstructResponse)
def reconstruct_signal(payload: ReconstructRequest, toolkit: EEGM2Toolkit = Depends(get_toolkit)):
    """
    重建单个窗口

    通道数与模型不一致时返回 400。
    """
    result = toolkit.reconstruct(payload.signal)
    logger.info(f"重建完成: 形状 {np.shape(result['reconstruction'])}, ACMSE {result['acmse']:.6f}")
    return ReconstructResponse(
        reconstruction=np.asarray(result["reconstruction"], dtype=np.float64).tolist(),
        acmse=float(result["acmse"]),
    )


@router.post("/represent", response_model=RepresentResponse)
def represent_signal(payload: RepresentRequest, toolkit: EEGM2Toolkit = Depends(get_toolkit)):
    """提取统计表征 z [B, C', 9]"""
    z = toolkit.represent(payload.signal, payload.layer)
    return RepresentResponse(
        layer=payload.layer,
        shape=list(z.shape),
        z=z.tolist(),
        stat_names=list(STAT_NAMES),
    )
