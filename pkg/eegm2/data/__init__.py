"""
数据模块
"""

from .dataset import (
    Record,
    SignalBatch,
    load_dataset,
    load_windows,
    record_holdout,
    split_subjects,
    subject_split,
    window,
)
from .manifest import MANIFEST_FORMAT, DatasetManifest, RecordInfo
from .quality import band_power_stability, check_stationarity
from .synth import band_power, pink_noise, synth_generate

__all__ = [
    "DatasetManifest", "RecordInfo", "MANIFEST_FORMAT", "Record", "SignalBatch",
    "load_dataset", "load_windows", "window", "split_subjects", "subject_split", "record_holdout",
    "synth_generate", "pink_noise", "band_power", "check_stationarity", "band_power_stability",
]
