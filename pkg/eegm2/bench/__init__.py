"""
基准测试模块
"""

from .harness import (
    CSV_COLUMNS,
    BenchRecord,
    MemoryMeasurement,
    bench_variant,
    count_params,
    epoch_time_comparison,
    fit_loglog,
    loglog_slope,
    measure_peak_memory,
    measure_speed,
    records_frame,
    resolve_variant,
    sweep,
    time_forward,
    write_sweep,
)

__all__ = [
    "BenchRecord", "MemoryMeasurement", "CSV_COLUMNS",
    "count_params", "resolve_variant", "measure_peak_memory", "measure_speed", "time_forward",
    "bench_variant", "sweep", "records_frame", "write_sweep",
    "fit_loglog", "loglog_slope", "epoch_time_comparison",
]
