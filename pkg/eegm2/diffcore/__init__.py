"""
可微数组引擎模块
"""

from . import ops
from .gradcheck import grad_check, grad_check_report
from .memory import MemoryTracker, tracker
from .nn import MLP, Conv1d, HookHandle, LayerNorm, Linear, Module
from .serialization import (
    load_checkpoint_file,
    load_tensor,
    read_tensor,
    save_checkpoint_file,
    save_tensor,
    write_tensor,
)
from .tensor import GradTape, Parameter, Tensor, as_tensor, resolve_dtype

__all__ = [
    "ops", "Tensor", "Parameter", "GradTape", "as_tensor", "resolve_dtype",
    "Module", "Linear", "Conv1d", "LayerNorm", "MLP", "HookHandle",
    "grad_check", "grad_check_report", "MemoryTracker", "tracker",
    "write_tensor", "read_tensor", "save_tensor", "load_tensor",
    "save_checkpoint_file", "load_checkpoint_file",
]
