"""
数据集清单

清单是 JSON 文档，记录采样率、通道数和每条记录的载荷文件。
载荷文件为单个 [C, n] 的 float32 张量（diffcore 张量格式，小端，通道优先）。
"""

import json
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..exceptions import DatasetError

MANIFEST_FORMAT = "eegm2-manifest/1"


class RecordInfo(BaseModel):
    """单条记录的元数据"""
    model_config = ConfigDict(extra="forbid")

    file: str
    subject_id: str
    label: Optional[int] = None
    n_samples: int = Field(ge=1)
    channels: Optional[int] = Field(None, ge=1, description="与清单不同则视为不一致")
    sampling_rate_hz: Optional[float] = Field(None, gt=0)

    @field_validator("subject_id")
    @classmethod
    def _subject_nonempty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("subject_id 不能为空")
        return v


class DatasetManifest(BaseModel):
    """数据集清单"""
    model_config = ConfigDict(extra="forbid")

    format: str = MANIFEST_FORMAT
    name: str
    sampling_rate_hz: float = Field(gt=0)
    channels: int = Field(ge=1)
    records: List[RecordInfo] = Field(default_factory=list)

    @field_validator("format")
    @classmethod
    def _known_format(cls, v: str) -> str:
        if v != MANIFEST_FORMAT:
            raise ValueError(f"不支持的清单格式: {v}")
        return v

    @property
    def subjects(self) -> List[str]:
        return sorted({r.subject_id for r in self.records})

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(self.model_dump(mode="json", exclude_none=True), ensure_ascii=False, indent=2),
            encoding="utf-8",
        )
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DatasetManifest":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"清单文件不存在: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DatasetError(f"清单不是合法的 JSON: {e}") from e
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise DatasetError(f"清单校验失败: {e}") from e
