"""
张量二进制格式

单个张量：8 字节魔数 b"EEGM2TSR"、u32 数据类型标记、u32 维数、每维一个 u64、
随后是按行主序排列的小端原始数值。全部整数均为小端。

检查点：8 字节魔数 b"EEGM2CKP"、u32 格式版本、u64 头部长度、UTF-8 JSON 头部、
u32 张量个数，然后依次是 (u32 名称长度, UTF-8 名称, 张量记录)。
"""

import io
import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Any, BinaryIO, Dict, Tuple, Union

import numpy as np

from ..exceptions import CheckpointError

TENSOR_MAGIC = b"EEGM2TSR"
CHECKPOINT_MAGIC = b"EEGM2CKP"
CHECKPOINT_VERSION = 1

DTYPE_TAGS = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
TAG_DTYPES = {tag: dtype for dtype, tag in DTYPE_TAGS.items()}


def _read_exact(fp: BinaryIO, n: int, what: str) -> bytes:
    data = fp.read(n)
    if len(data) != n:
        raise CheckpointError(f"文件在读取{what}时提前结束: 需要 {n} 字节, 实际 {len(data)} 字节")
    return data


def write_tensor(fp: BinaryIO, array: np.ndarray) -> None:
    array = np.asarray(array)
    dtype = array.dtype.newbyteorder("<")
    if dtype not in DTYPE_TAGS:
        raise ValueError(f"不支持序列化的数据类型: {array.dtype}")
    fp.write(TENSOR_MAGIC)
    fp.write(struct.pack("<II", DTYPE_TAGS[dtype], array.ndim))
    if array.ndim:
        fp.write(struct.pack(f"<{array.ndim}Q", *array.shape))
    fp.write(np.ascontiguousarray(array, dtype=dtype).tobytes(order="C"))


def read_tensor(fp: BinaryIO) -> np.ndarray:
    magic = _read_exact(fp, 8, "魔数")
    if magic != TENSOR_MAGIC:
        raise CheckpointError(f"张量魔数不正确: {magic!r}")
    tag, rank = struct.unpack("<II", _read_exact(fp, 8, "张量头"))
    if tag not in TAG_DTYPES:
        raise CheckpointError(f"未知的数据类型标记: {tag}")
    shape: Tuple[int, ...] = ()
    if rank:
        shape = struct.unpack(f"<{rank}Q", _read_exact(fp, 8 * rank, "形状"))
    dtype = TAG_DTYPES[tag]
    count = int(np.prod(shape, dtype=np.int64))
    payload = _read_exact(fp, count * dtype.itemsize, "张量数据")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))


def tensor_to_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    write_tensor(buffer, array)
    return buffer.getvalue()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    return read_tensor(io.BytesIO(data))


def save_tensor(path: Union[str, Path], array: np.ndarray) -> None:
    with open(path, "wb") as fp:
        write_tensor(fp, array)


def load_tensor(path: Union[str, Path]) -> np.ndarray:
    with open(path, "rb") as fp:
        return read_tensor(fp)


def save_checkpoint_file(path: Union[str, Path],
                         header: Dict[str, Any],
                         tensors: Dict[str, np.ndarray]) -> None:
    """
    写入检查点

    Args:
        path: 输出路径
        header: 可 JSON 序列化的头部（结构配置等）
        tensors: 参数名到数组的映射，按插入顺序写入
    """
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fp:
        fp.write(CHECKPOINT_MAGIC)
        fp.write(struct.pack("<IQ", CHECKPOINT_VERSION, len(header_bytes)))
        fp.write(header_bytes)
        fp.write(struct.pack("<I", len(tensors)))
        for name, array in tensors.items():
            encoded = name.encode("utf-8")
            fp.write(struct.pack("<I", len(encoded)))
            fp.write(encoded)
            write_tensor(fp, array)


def load_checkpoint_file(path: Union[str, Path]) -> Tuple[Dict[str, Any], "OrderedDict[str, np.ndarray]"]:
    """读取检查点，返回 (头部, 参数表)"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"检查点不存在: {path}")
    with open(path, "rb") as fp:
        magic = _read_exact(fp, 8, "魔数")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"不是 EEGM2 检查点文件: {path}")
        version, header_len = struct.unpack("<IQ", _read_exact(fp, 12, "检查点头"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"不支持的检查点版本: {version}")
        try:
            header = json.loads(_read_exact(fp, header_len, "配置头部").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"检查点头部无法解析: {e}") from e
        (count,) = struct.unpack("<I", _read_exact(fp, 4, "张量个数"))
        tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fp, 4, "名称长度"))
            name = _read_exact(fp, name_len, "名称").decode("utf-8")
            tensors[name] = read_tensor(fp)
        if fp.read(1):
            raise CheckpointError(f"检查点末尾有多余数据: {path}")
    return header, tensors
