"""
表征提取与探针评估
"""

from .export import export_representations, representations_frame
from .metrics import ProbeReport, auroc, balanced_accuracy, multiclass_auroc
from .probes import (
    LinearProbe,
    MLPProbe,
    linear_probe_fit,
    mlp_probe_fit,
    probe_evaluate,
    probe_summary_table,
)
from .stats import QUANTILES, STAT_NAMES, extract_stats, flatten_stats
from .tap import encode, tap_encoder

__all__ = [
    "extract_stats", "flatten_stats", "STAT_NAMES", "QUANTILES",
    "tap_encoder", "encode",
    "LinearProbe", "MLPProbe", "linear_probe_fit", "mlp_probe_fit", "probe_evaluate",
    "probe_summary_table",
    "balanced_accuracy", "auroc", "multiclass_auroc", "ProbeReport",
    "export_representations", "representations_frame",
]
