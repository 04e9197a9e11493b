"""
Pydantic数据模型定义

定义API请求和响应的数据结构
"""

from datetime import datetime
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, field_validator

from eegm2.config import VariantId

# [C, T] 或 [B, C, T]
SignalPayload = Union[List[List[float]], List[List[List[float]]]]


class ReconstructRequest(BaseModel):
    """重建请求模型"""
    signal: List[List[float]] = Field(description="单个窗口，形状 [C, T]")

    @field_validator("signal")
    @classmethod
    def validate_signal(cls, v: List[List[float]]) -> List[List[float]]:
        if not v or not v[0]:
            raise ValueError("信号不能为空")
        if len({len(row) for row in v}) != 1:
            raise ValueError("各通道长度必须一致")
        return v


class ReconstructResponse(BaseModel):
    """重建响应模型"""
    reconstruction: List[List[float]] = Field(description="重建信号 [C, T]")
    acmse: float = Field(description="所有通道的平均 MSE")
    timestamp: datetime = Field(default_factory=datetime.now, description="处理时间")


class RepresentRequest(BaseModel):
    """表征提取请求模型"""
    signal: SignalPayload = Field(description="[C, T] 或 [B, C, T]")
    layer: str = Field("encoder.stage3", description="截取表征的层")


class RepresentResponse(BaseModel):
    """表征提取响应模型"""
    layer: str = Field(description="截取表征的层")
    shape: List[int] = Field(description="表征形状 [B, C', 9]")
    z: List[List[List[float]]] = Field(description="统计表征")
    stat_names: List[str] = Field(description="九个统计量的名称")


class ModelInfoResponse(BaseModel):
    """模型信息响应模型"""
    variant: str = Field(description="消融变体")
    config: Dict[str, Any] = Field(description="结构配置")
    param_count: int = Field(description="参数量")
    encoder_param_count: int = Field(description="编码器参数量")
    dtype: str = Field(description="计算精度")
    checkpoint: Optional[str] = Field(None, description="检查点路径")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="检查点元数据")


class ParamCountRequest(BaseModel):
    """参数量请求模型"""
    preset: str = Field("light", description="预设: full / light / tiny")
    variant: VariantId = Field(VariantId.FULL, description="消融变体")
    in_channels: int = Field(16, ge=1, le=1024, description="输入通道数")

    @field_validator("preset")
    @classmethod
    def validate_preset(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in {"full", "light", "tiny"}:
            raise ValueError("预设必须是 full、light 或 tiny")
        return v


class ParamCountResponse(BaseModel):
    """参数量响应模型"""
    preset: str = Field(description="预设")
    variant: str = Field(description="消融变体")
    in_channels: int = Field(description="输入通道数")
    param_count: int = Field(description="参数量")


class HealthResponse(BaseModel):
    """健康检查响应模型"""
    status: str = Field(description="服务状态")
    model_loaded: bool = Field(description="是否已载入模型")
    version: str = Field(description="版本号")
    timestamp: datetime = Field(default_factory=datetime.now, description="检查时间")
