"""
内存记账

在张量分配处插桩，记录存活字节数和高水位，用于基准测试中的峰值内存测量。
设置上限后，超出上限的分配会在真正分配之前抛出 OutOfMemoryError。

measure(batch_scale=B) 期间的每次分配按 B 倍计入：前向只算一个窗口，记账等价于
B 个窗口的批。所有算子都逐窗口独立，因此激活字节数与批大小严格成正比。
"""

import threading
from contextlib import contextmanager
from typing import Iterator, Optional

from ..exceptions import OutOfMemoryError


class MemoryTracker:
    """张量内存记账器"""

    def __init__(self):
        self.live_bytes: int = 0
        self.peak_bytes: int = 0
        self.cap_bytes: Optional[int] = None
        self.batch_scale: int = 1
        self._lock = threading.Lock()

    def charge(self, nbytes: int) -> int:
        """一次分配实际计入的字节数"""
        return int(nbytes) * self.batch_scale

    def reserve(self, nbytes: int) -> None:
        """检查一次即将发生的分配是否会超出上限"""
        cap = self.cap_bytes
        charged = self.charge(nbytes)
        if cap is not None and self.live_bytes + charged > cap:
            raise OutOfMemoryError(charged, self.live_bytes, cap)

    def allocate(self, nbytes: int) -> int:
        """记入一次分配，返回计入的字节数，释放时应原样传给 release"""
        with self._lock:
            self.reserve(nbytes)
            charged = self.charge(nbytes)
            self.live_bytes += charged
            if self.live_bytes > self.peak_bytes:
                self.peak_bytes = self.live_bytes
            return charged

    def release(self, charged: int) -> None:
        with self._lock:
            self.live_bytes -= charged

    def reset_peak(self) -> None:
        with self._lock:
            self.peak_bytes = self.live_bytes

    @contextmanager
    def measure(self, cap_bytes: Optional[int] = None,
                batch_scale: int = 1) -> Iterator["MemoryTracker"]:
        """
        测量一段代码的峰值内存

        进入时把高水位重置为当前存活字节数，退出时恢复原来的上限和倍数。

        Args:
            cap_bytes: 测量期间的内存上限，None 表示不限
            batch_scale: 分配计入倍数，即等价的批大小
        """
        if batch_scale < 1:
            raise ValueError(f"batch_scale 必须 >= 1，得到 {batch_scale}")
        previous = (self.cap_bytes, self.batch_scale)
        self.cap_bytes = cap_bytes
        self.batch_scale = batch_scale
        self.reset_peak()
        try:
            yield self
        finally:
            self.cap_bytes, self.batch_scale = previous


tracker = MemoryTracker()
