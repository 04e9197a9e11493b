"""
测试共用的夹具
"""

import numpy as np
import pytest

from eegm2.arch import build_variant
from eegm2.config import ArchConfig, SynthConfig
from eegm2.data.dataset import load_windows
from eegm2.data.synth import synth_generate


@pytest.fixture
def tiny_config():
    """梯度检验规模的结构（C_in=2, 宽度 [6, 12, 24]）"""
    return ArchConfig.preset("tiny", in_channels=2)


@pytest.fixture
def tiny_model(tiny_config):
    return build_variant(tiny_config, seed=0, dtype="float64")


@pytest.fixture
def small_synth(tmp_path):
    """10 个被试、4 通道、每个窗口 64 点的小型合成数据集"""
    config = SynthConfig(n_subjects=10, windows_per_subject=4, channels=4,
                         window_len=64, fs=64.0, seed=0)
    manifest_path, _ = synth_generate(config, tmp_path / "synth")
    return manifest_path


@pytest.fixture
def small_batch(small_synth):
    return load_windows(small_synth, window_len=64)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
