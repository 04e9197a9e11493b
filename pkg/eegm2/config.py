"""
配置模型定义

所有可调参数都通过 pydantic 模型声明，未知字段一律拒绝，
CLI 与 HTTP 服务共用同一套模型。
"""

import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ConfigError

DType = Literal["float32", "float64"]


class VariantId(str, Enum):
    """消融变体"""
    FULL = "full"
    S1 = "s1"  # 去掉多尺度嵌入
    S2 = "s2"  # 只用 L1 损失
    S3 = "s3"  # Mamba-1 块
    S4 = "s4"  # Mamba-1 块 + 去掉多尺度嵌入
    S5 = "s5"  # Transformer 块

    @classmethod
    def _missing_(cls, value: object) -> Optional["VariantId"]:
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered.startswith("eegm2-"):
                lowered = lowered[len("eegm2-"):]
            for member in cls:
                if member.value == lowered:
                    return member
        return None


class AMode(str, Enum):
    """衰减参数化方式"""
    SCALAR_PER_HEAD = "scalar_per_head"  # Mamba-2
    DIAGONAL_PER_CHANNEL = "diagonal_per_channel"  # Mamba-1


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class SSDConfig(_StrictModel):
    """状态空间块配置"""
    d_model: int = Field(ge=1, description="特征宽度")
    d_state: int = Field(16, ge=1, description="隐状态维度 N")
    n_heads: int = Field(1, ge=1, description="头数")
    expand: int = Field(1, ge=1, description="内部宽度倍数")
    a_mode: AMode = Field(AMode.SCALAR_PER_HEAD, description="衰减参数化方式")
    dt_min: float = Field(1e-3, gt=0)
    dt_max: float = Field(1e-1, gt=0)
    chunk: int = Field(64, ge=1, description="分块扫描的块长")

    @model_validator(mode="after")
    def _check(self) -> "SSDConfig":
        if self.d_inner % self.n_heads != 0:
            raise ValueError(
                f"内部宽度 {self.d_inner} 不能被头数 {self.n_heads} 整除"
            )
        if self.dt_min >= self.dt_max:
            raise ValueError("dt_min 必须小于 dt_max")
        return self

    @property
    def d_inner(self) -> int:
        return self.expand * self.d_model

    @property
    def head_dim(self) -> int:
        return self.d_inner // self.n_heads

    @property
    def dt_rank(self) -> int:
        return math.ceil(self.d_model / 16)


class ArchConfig(_StrictModel):
    """EEGM2 网络结构配置"""
    in_channels: int = Field(ge=1, description="输入通道数 C_in")
    stage_widths: List[int] = Field(description="三个编码阶段的宽度 [d1, d2, d3]")
    pool: int = Field(2, ge=2, description="每个下采样阶段的池化因子")
    d_state: int = Field(16, ge=1)
    n_heads: int = Field(1, ge=1)
    expand: int = Field(1, ge=1)
    chunk: int = Field(64, ge=1)
    multiscale: bool = Field(True, description="是否使用多尺度嵌入")
    variant: VariantId = VariantId.FULL
    param_budget_hint: Optional[Literal["full", "light"]] = None

    @field_validator("stage_widths")
    @classmethod
    def _widths_increasing(cls, v: List[int]) -> List[int]:
        if len(v) != 3:
            raise ValueError("stage_widths 必须恰好包含三个宽度")
        if any(w < 1 for w in v):
            raise ValueError("stage_widths 必须为正整数")
        if not (v[0] < v[1] < v[2]):
            raise ValueError(f"stage_widths 必须严格递增: {v}")
        return v

    @model_validator(mode="after")
    def _check(self) -> "ArchConfig":
        if self.uses_multiscale and self.stage_widths[0] < 3:
            raise ValueError("多尺度嵌入要求 d1 >= 3")
        for width in self.block_widths:
            if (self.expand * width) % self.n_heads != 0:
                raise ValueError(
                    f"宽度 {width} × expand {self.expand} 不能被头数 {self.n_heads} 整除"
                )
        return self

    @property
    def uses_multiscale(self) -> bool:
        return self.multiscale and self.variant not in (VariantId.S1, VariantId.S4)

    @property
    def a_mode(self) -> AMode:
        if self.variant in (VariantId.S3, VariantId.S4):
            return AMode.DIAGONAL_PER_CHANNEL
        return AMode.SCALAR_PER_HEAD

    @property
    def uses_attention(self) -> bool:
        return self.variant == VariantId.S5

    @property
    def block_widths(self) -> Tuple[int, int, int]:
        """序列块所在宽度：编码阶段1、中介层/解码阶段1、解码阶段2"""
        d1, d2, d3 = self.stage_widths
        return d1, d3, d2

    @property
    def length_multiple(self) -> int:
        return self.pool ** 2

    def ssd_config(self, width: int) -> SSDConfig:
        return SSDConfig(
            d_model=width,
            d_state=self.d_state,
            n_heads=self.n_heads,
            expand=self.expand,
            a_mode=self.a_mode,
            chunk=self.chunk,
        )

    def with_variant(self, variant: Union[str, VariantId]) -> "ArchConfig":
        return ArchConfig(**{**self.model_dump(), "variant": VariantId(variant)})

    @classmethod
    def preset(cls,
               name: str,
               in_channels: int = 16,
               variant: Union[str, VariantId] = VariantId.FULL) -> "ArchConfig":
        """
        预设结构

        Args:
            name: 'full'（约 4.5M 参数）、'light'（约 0.25M 参数）或 'tiny'（梯度检验用）
            in_channels: 输入通道数
            variant: 消融变体

        Returns:
            结构配置
        """
        presets: Dict[str, Dict[str, Any]] = {
            "full": dict(stage_widths=[128, 256, 512], d_state=64, n_heads=8,
                         expand=2, param_budget_hint="full"),
            "light": dict(stage_widths=[32, 64, 128], d_state=64, n_heads=4,
                          expand=1, param_budget_hint="light"),
            "tiny": dict(stage_widths=[6, 12, 24], d_state=4, n_heads=2,
                         expand=1, chunk=8),
        }
        if name not in presets:
            raise ConfigError(f"未知预设: {name}，可选 {sorted(presets)}")
        return cls(in_channels=in_channels, variant=VariantId(variant), **presets[name])


class LossConfig(_StrictModel):
    """时域-频域重建损失配置"""
    alpha: float = Field(1.0, ge=0, description="时域 L1 权重")
    beta: float = Field(1.0, ge=0, description="频域幅度谱权重")

    @model_validator(mode="after")
    def _check(self) -> "LossConfig":
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta 必须大于 0")
        return self

    @classmethod
    def for_variant(cls, variant: Union[str, VariantId],
                    alpha: float = 1.0, beta: float = 1.0) -> "LossConfig":
        if VariantId(variant) == VariantId.S2:
            return cls(alpha=alpha if alpha > 0 else 1.0, beta=0.0)
        return cls(alpha=alpha, beta=beta)


class OptimConfig(_StrictModel):
    """预训练优化器与学习率调度配置"""
    init_lr: float = Field(2.5e-4, gt=0)
    weight_decay: float = Field(1e-2, ge=0)
    max_lr: float = Field(5e-4, gt=0)
    warmup_frac: float = Field(0.30, gt=0, lt=1)
    initial_lr_div: float = Field(10.0, gt=0)
    final_lr_div: float = Field(1e4, gt=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0)
    epochs: int = Field(50, ge=1)
    batch_size: int = Field(64, ge=1)
    schedule: Literal["onecycle", "constant"] = "onecycle"
    val_frac: float = Field(0.10, ge=0, lt=1)
    divergence_factor: float = Field(1e3, gt=1)

    @field_validator("betas")
    @classmethod
    def _betas_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0 <= b < 1 for b in v):
            raise ValueError("betas 必须位于 [0, 1)")
        return v


class FinetuneConfig(_StrictModel):
    """微调配置"""
    lr: float = Field(1e-4, gt=0)
    weight_decay: float = Field(1e-2, ge=0)
    epochs: int = Field(5, ge=1, le=5)
    batch_size: int = Field(32, ge=1)
    hidden: Tuple[int, int] = (128, 64)
    freeze_backbone: bool = False
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])


class ProbeConfig(_StrictModel):
    """线性/非线性探针配置"""
    layer: str = "encoder.stage3"
    l2: float = Field(1e-3, ge=0)
    solver: Literal["lbfgs", "gd"] = "lbfgs"
    max_iter: int = Field(500, ge=1)
    tol: float = Field(1e-6, gt=0)
    mlp_hidden: Tuple[int, int] = (128, 64)
    mlp_epochs: int = Field(100, ge=1)
    mlp_lr: float = Field(1e-3, gt=0)
    batch_size: int = Field(64, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])


class SynthConfig(_StrictModel):
    """合成数据集配置"""
    name: str = "synthetic-alpha"
    n_subjects: int = Field(20, ge=1)
    windows_per_subject: int = Field(20, ge=1)
    channels: int = Field(14, ge=1)
    window_len: int = Field(256, ge=2)
    fs: float = Field(128.0, gt=0)
    alpha_amplitude: float = Field(1.0, ge=0)
    alpha_band: Tuple[float, float] = (8.0, 12.0)
    seed: int = 0

    @field_validator("alpha_band")
    @classmethod
    def _band_order(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if not 0 < v[0] < v[1]:
            raise ValueError("alpha_band 必须满足 0 < 下限 < 上限")
        return v


class BenchConfig(_StrictModel):
    """推理基准测试配置"""
    variants: List[str] = Field(default_factory=lambda: ["full", "light", "s5"])
    seq_lens: List[int] = Field(
        default_factory=lambda: [50, 128, 512, 1024, 2048, 4096, 8192, 12000]
    )
    in_channels: int = Field(16, ge=1)
    warmup: int = Field(15, ge=0)
    runs: int = Field(10, ge=1)
    cap_bytes: int = Field(48 * 1024 ** 3, ge=1)
    memory_batch_size: int = Field(16, ge=1, description="峰值内存按多少个窗口的批记账；速度始终按批大小 1 计时")
    dtype: DType = "float32"

    @field_validator("seq_lens")
    @classmethod
    def _positive_lengths(cls, v: List[int]) -> List[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("seq_lens 必须为非空正整数列表")
        return sorted(v)


class RunConfig(_StrictModel):
    """一次 CLI 运行的完整配置"""
    seed: int = 0
    output_dir: Path = Path("eegm2_output")
    force: bool = False
    preset: Literal["full", "light", "tiny"] = "light"
    variant: VariantId = VariantId.FULL
    dtype: DType = "float32"
    data: Optional[Path] = None
    checkpoint: Optional[Path] = None
    window_len: int = Field(256, ge=2, description="切窗长度")
    stride: Optional[int] = Field(None, ge=1, description="切窗步长，默认等于窗口长度")
    loss: LossConfig = Field(default_factory=LossConfig)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    finetune: FinetuneConfig = Field(default_factory=FinetuneConfig)
    probe: ProbeConfig = Field(default_factory=ProbeConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    split: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    ablate_variants: List[str] = Field(default_factory=lambda: ["full", "s1", "s2"])

    @classmethod
    def from_file(cls, path: Optional[Union[str, Path]] = None,
                  overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """
        从 JSON 文件加载配置并应用覆盖项

        Args:
            path: 配置文件路径，None 表示使用默认值
            overrides: 以点号分隔的键（如 "optim.epochs"）到取值的映射，值为 None 的项被忽略

        Returns:
            校验后的配置
        """
        raw: Dict[str, Any] = {}
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"配置文件不存在: {path}")
            try:
                raw = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise ConfigError(f"配置文件不是合法的 JSON: {e}") from e
        for dotted, value in (overrides or {}).items():
            if value is None:
                continue
            node = raw
            *parents, leaf = dotted.split(".")
            for key in parents:
                node = node.setdefault(key, {})
            node[leaf] = value
        return validate_config(cls, raw)

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(
            json.dumps(self.model_dump(mode="json"), ensure_ascii=False, indent=2),
            encoding="utf-8",
        )


def validate_config(model: Any, raw: Dict[str, Any]) -> Any:
    """用 pydantic 校验配置，把 ValidationError 统一转换成 ConfigError"""
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"配置校验失败: {details}") from e
