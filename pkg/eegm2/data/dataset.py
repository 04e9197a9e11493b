"""
数据集读取、切窗与按被试划分
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..diffcore.serialization import load_tensor
from ..exceptions import CheckpointError, DatasetError
from .manifest import DatasetManifest, RecordInfo

logger = logging.getLogger(__name__)


@dataclass
class Record:
    """一条载入的记录"""
    data: np.ndarray  # [C, n] float32
    info: RecordInfo
    sampling_rate: float


@dataclass
class SignalBatch:
    """
    信号批

    x 为 [B, C, T] 的 float32 数组；y、subjects、records 为可选的逐样本元数据。
    """
    x: np.ndarray
    y: Optional[np.ndarray] = None
    subjects: Optional[np.ndarray] = None
    records: Optional[np.ndarray] = None
    sampling_rate: float = 1.0

    def __post_init__(self):
        self.x = np.asarray(self.x)
        if self.x.ndim != 3:
            raise DatasetError(f"SignalBatch.x 应为 [B, C, T]，得到 {self.x.shape}")
        if not np.all(np.isfinite(self.x)):
            raise DatasetError("SignalBatch 含有非有限值")
        n = self.x.shape[0]
        for name in ("y", "subjects", "records"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value)
                if value.shape != (n,):
                    raise DatasetError(f"SignalBatch.{name} 长度 {value.shape} 与样本数 {n} 不一致")
                setattr(self, name, value)
        if self.y is not None:
            self.y = self.y.astype(np.int64)

    def __len__(self) -> int:
        return int(self.x.shape[0])

    @property
    def channels(self) -> int:
        return int(self.x.shape[1])

    @property
    def length(self) -> int:
        return int(self.x.shape[2])

    @property
    def n_classes(self) -> int:
        return 0 if self.y is None else int(len(np.unique(self.y)))

    def require_labels(self) -> np.ndarray:
        if self.y is None:
            raise DatasetError("该数据批没有标签")
        return self.y

    def subset(self, index: Union[np.ndarray, Sequence[int]]) -> "SignalBatch":
        index = np.asarray(index, dtype=np.int64)
        pick = lambda a: None if a is None else a[index]  # noqa: E731
        return SignalBatch(self.x[index], pick(self.y), pick(self.subjects),
                           pick(self.records), self.sampling_rate)

    @classmethod
    def concat(cls, batches: Sequence["SignalBatch"]) -> "SignalBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            raise DatasetError("没有可拼接的样本")
        shapes = {b.x.shape[1:] for b in batches}
        if len(shapes) != 1:
            raise DatasetError(f"各批的 [C, T] 不一致: {sorted(shapes)}")

        def join(name: str):
            values = [getattr(b, name) for b in batches]
            return None if any(v is None for v in values) else np.concatenate(values)

        return cls(np.concatenate([b.x for b in batches]), join("y"), join("subjects"),
                   join("records"), batches[0].sampling_rate)


def load_dataset(manifest_path: Union[str, Path]) -> Iterator[Record]:
    """
    按清单逐条读取记录

    Args:
        manifest_path: 清单文件路径，载荷路径相对于清单所在目录

    Yields:
        Record，data 为通道优先的 float32 数组
    """
    manifest_path = Path(manifest_path)
    manifest = DatasetManifest.load(manifest_path)
    root = manifest_path.parent
    for info in manifest.records:
        if info.channels is not None and info.channels != manifest.channels:
            raise DatasetError(
                f"通道数 {info.channels} 与清单声明的 {manifest.channels} 不一致", record=info.file
            )
        if info.sampling_rate_hz is not None and info.sampling_rate_hz != manifest.sampling_rate_hz:
            raise DatasetError(
                f"采样率 {info.sampling_rate_hz} 与清单声明的 {manifest.sampling_rate_hz} 不一致",
                record=info.file,
            )
        payload = root / info.file
        if not payload.exists():
            raise DatasetError("载荷文件不存在", record=info.file)
        try:
            data = load_tensor(payload)
        except CheckpointError as e:
            raise DatasetError(f"载荷文件无法解析: {e}", record=info.file) from e
        if data.dtype != np.float32:
            raise DatasetError(f"载荷数据类型应为 float32，得到 {data.dtype}", record=info.file)
        if data.ndim != 2 or data.shape[0] != manifest.channels:
            raise DatasetError(
                f"载荷形状 {data.shape} 与通道数 {manifest.channels} 不符", record=info.file
            )
        if data.shape[1] != info.n_samples:
            raise DatasetError(
                f"载荷长度 {data.shape[1]} 与声明的 n_samples {info.n_samples} 不一致", record=info.file
            )
        yield Record(data=data, info=info, sampling_rate=manifest.sampling_rate_hz)


def window(record: Record, window_len: int, stride: Optional[int] = None) -> SignalBatch:
    """
    把一条记录切成定长窗口，余下不足一个窗口的尾部丢弃

    Args:
        record: 记录
        window_len: 窗口长度
        stride: 步长，默认等于窗口长度（不重叠）

    Returns:
        该记录的窗口批，每个窗口继承记录的被试与标签；记录过短时返回空批并记录警告
    """
    stride = stride or window_len
    if window_len < 1 or stride < 1:
        raise ValueError(f"窗口长度和步长必须 >= 1，得到 {window_len}/{stride}")
    channels, n = record.data.shape
    if window_len > n:
        logger.warning("记录 %s 长度 %d 小于窗口长度 %d，已跳过", record.info.file, n, window_len)
        return SignalBatch(np.zeros((0, channels, window_len), dtype=np.float32),
                           sampling_rate=record.sampling_rate)
    count = (n - window_len) // stride + 1
    starts = np.arange(count) * stride
    x = np.stack([record.data[:, s:s + window_len] for s in starts]).astype(np.float32)
    label = record.info.label
    return SignalBatch(
        x,
        y=None if label is None else np.full(count, label, dtype=np.int64),
        subjects=np.full(count, record.info.subject_id, dtype=object),
        records=np.full(count, record.info.file, dtype=object),
        sampling_rate=record.sampling_rate,
    )


def load_windows(manifest_path: Union[str, Path], window_len: Optional[int] = None,
                 stride: Optional[int] = None) -> SignalBatch:
    """读取整个数据集并切窗；window_len 缺省时取最短记录长度"""
    records = list(load_dataset(manifest_path))
    if not records:
        raise DatasetError(f"数据集为空: {manifest_path}")
    if window_len is None:
        window_len = min(r.data.shape[1] for r in records)
    batches = [window(r, window_len, stride) for r in records]
    if not any(len(b) for b in batches):
        raise DatasetError(f"没有记录长于窗口长度 {window_len}")
    batch = SignalBatch.concat(batches)
    if batch.y is None and any(r.info.label is not None for r in records):
        logger.warning("部分记录缺少标签，窗口批不带标签")
    return batch


def split_subjects(sizes: Dict[str, int], fractions: Tuple[float, float, float],
                   seed: int) -> Tuple[List[str], List[str], List[str]]:
    """
    被试级划分

    被试按种子打乱后依次分给当前缺口（目标样本数 - 已分配样本数）最大的划分；
    剩余被试数等于尚为空的划分数时，直接补给这些划分，保证每个非零比例的划分都有被试。

    Args:
        sizes: 被试到样本数的映射
        fractions: (train, val, test) 比例
        seed: 随机种子

    Returns:
        三个被试列表
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or sum(fractions) <= 0:
        raise ValueError(f"划分比例不合法: {fractions}")
    subjects = sorted(sizes)
    if len(subjects) < 3:
        raise DatasetError(f"按被试划分至少需要 3 个被试，得到 {len(subjects)} 个")
    rng = np.random.default_rng(seed)
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    total = float(sum(sizes.values()))
    norm = sum(fractions)
    targets = [total * f / norm for f in fractions]
    assigned = [0.0, 0.0, 0.0]
    parts: List[List[str]] = [[], [], []]
    for i, subject in enumerate(order):
        remaining = len(order) - i
        empty = [k for k in range(3) if fractions[k] > 0 and not parts[k]]
        if empty and remaining <= len(empty):
            k = empty[0]
        else:
            k = max(range(3), key=lambda j: (targets[j] - assigned[j], fractions[j], -j))
        parts[k].append(subject)
        assigned[k] += sizes[subject]
    return parts[0], parts[1], parts[2]



def subject_split(items: Union[SignalBatch, Sequence[RecordInfo]],
                  fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1),
                  seed: int = 0):
    """
    按被试把数据划分为 (train, val, test)，同一被试只出现在一个划分中

    Args:
        items: 窗口批（按窗口数计样本）或记录列表（按 n_samples 计样本）
        fractions: 目标比例
        seed: 随机种子

    Returns:
        与输入类型相同的三个划分
    """
    if isinstance(items, SignalBatch):
        if items.subjects is None:
            raise DatasetError("数据批缺少被试信息，无法按被试划分")
        subjects, counts = np.unique(items.subjects.astype(str), return_counts=True)
        parts = split_subjects(dict(zip(subjects.tolist(), counts.tolist())), fractions, seed)
        labels = items.subjects.astype(str)
        return tuple(items.subset(np.flatnonzero(np.isin(labels, part))) for part in parts)

    sizes: Dict[str, int] = {}
    for info in items:
        sizes[info.subject_id] = sizes.get(info.subject_id, 0) + info.n_samples
    parts = split_subjects(sizes, fractions, seed)
    return tuple([info for info in items if info.subject_id in set(part)] for part in parts)


def record_holdout(batch: SignalBatch, fraction: float, seed: int) -> Tuple[SignalBatch, SignalBatch]:
    """按记录留出一部分窗口作为验证集，至少保留一条记录用于训练"""
    if fraction <= 0 or len(batch) < 2:
        return batch, batch.subset([])
    keys = batch.records if batch.records is not None else np.arange(len(batch)).astype(object)
    unique = np.unique(keys.astype(str))
    rng = np.random.default_rng(seed)
    n_val = min(max(int(round(fraction * len(unique))), 1), len(unique) - 1)
    if n_val < 1:
        return batch, batch.subset([])
    held = set(rng.choice(unique, size=n_val, replace=False).tolist())
    is_val = np.array([k in held for k in keys.astype(str)])
    return batch.subset(np.flatnonzero(~is_val)), batch.subset(np.flatnonzero(is_val))
