"""
桌面规模的端到端验收测试

运行较慢，默认用 `pytest -m "not slow"` 跳过；完整验收用 `pytest -m slow`。
"""

import numpy as np
import pytest

from eegm2.arch import build_variant
from eegm2.bench import loglog_slope, sweep
from eegm2.config import ArchConfig, BenchConfig, LossConfig, OptimConfig, ProbeConfig, SynthConfig
from eegm2.data import SignalBatch, load_windows, subject_split, synth_generate
from eegm2.representation import probe_evaluate
from eegm2.ssd.scan import scan_chunked, scan_naive
from eegm2.train import Pretrainer, evaluate_reconstruction, mean_predictor_acmse

pytestmark = pytest.mark.slow

SPLIT = (0.8, 0.1, 0.1)
SEQ_LENS = [1024, 2048, 4096, 6000, 8192, 12000]


def _dataset(tmp_path_factory, name, **overrides):
    config = SynthConfig(**overrides)
    path, _ = synth_generate(config, tmp_path_factory.mktemp(name))
    return load_windows(path, config.window_len)


def _pretrained(train, val, variant="full", epochs=50, seed=0):
    arch = ArchConfig.preset("light", in_channels=train.channels, variant=variant)
    model = build_variant(arch, seed=seed)
    trainer = Pretrainer(model, OptimConfig(epochs=epochs, batch_size=32),
                         LossConfig.for_variant(arch.variant), seed=seed)
    return model, trainer.fit(train, val=val)


@pytest.fixture(scope="module")
def alpha_splits(tmp_path_factory):
    """默认合成数据：20 个被试、14 通道、256 点"""
    batch = _dataset(tmp_path_factory, "alpha")
    return subject_split(batch, SPLIT, seed=0)


@pytest.fixture(scope="module")
def pretrained_full(alpha_splits):
    train, val, _ = alpha_splits
    return _pretrained(train, val)


def test_scan_equivalence_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        length = int(rng.integers(1, 513))
        chunk = int(rng.choice([1, 7, 16, 64, 100, 512]))
        heads, p, n = (int(v) for v in rng.integers(1, 4, size=3))
        x = rng.standard_normal((1, length, heads, p))
        a = rng.uniform(0.5, 1.0, size=(1, length, heads))
        b = rng.standard_normal((1, length, n))
        c = rng.standard_normal((1, length, n))
        expected = scan_naive(x, a, b, c)
        actual = scan_chunked(x, a, b, c, chunk=chunk).data
        assert np.max(np.abs(actual - expected) / (1.0 + np.abs(expected))) < 1e-10


class TestAlphaPipeline:
    """合成 alpha 任务：预训练 → 非线性探针"""

    def test_pretraining_converges(self, alpha_splits, pretrained_full):
        train, _, test = alpha_splits
        model, result = pretrained_full
        losses = [r["train_loss"] for r in result.history]
        assert losses[-1] <= 0.1 * losses[0]
        metrics = evaluate_reconstruction(model, test, LossConfig())
        assert metrics["acmse"] < mean_predictor_acmse(train, test)

    def test_probe_beats_random_encoder(self, alpha_splits, pretrained_full):
        train, val, test = alpha_splits
        model, _ = pretrained_full
        probe_train = SignalBatch.concat([train, val])
        summary = probe_evaluate(model, probe_train, test, "light").summary()
        assert summary["balanced_acc"]["mean"] >= 0.90
        assert summary["auroc"]["mean"] >= 0.95

        random_model = build_variant(ArchConfig.preset("light", in_channels=train.channels), seed=1)
        baseline = probe_evaluate(random_model, probe_train, test, "light").summary()
        assert baseline["balanced_acc"]["mean"] < summary["balanced_acc"]["mean"]

    def test_ablation_direction(self, alpha_splits, pretrained_full):
        train, val, test = alpha_splits
        probe_train = SignalBatch.concat([train, val])
        model, full_run = pretrained_full
        full_acc = probe_evaluate(model, probe_train, test, "light").summary()["balanced_acc"]["mean"]
        for variant, slack in (("s1", 0.01), ("s2", 0.0)):
            ablated, _ = _pretrained(train, val, variant)
            acc = probe_evaluate(ablated, probe_train, test, "light").summary()["balanced_acc"]["mean"]
            assert full_acc >= acc - slack, variant

        _, s3_run = _pretrained(train, val, "s3", epochs=2)
        assert full_run.mean_epoch_seconds < s3_run.mean_epoch_seconds


def test_null_effect_control(tmp_path_factory):
    """振荡幅度为 0 时两类同分布，探针应接近随机"""
    batch = _dataset(tmp_path_factory, "null", n_subjects=50, alpha_amplitude=0.0)
    model = build_variant(ArchConfig.preset("light", in_channels=batch.channels), seed=0)
    scores = []
    for seed in range(5):
        train, val, test = subject_split(batch, SPLIT, seed=seed)
        report = probe_evaluate(model, SignalBatch.concat([train, val]), test, "linear",
                                ProbeConfig(), seeds=[0])
        scores.append(report.summary()["balanced_acc"]["mean"])
    assert 0.45 <= np.mean(scores) <= 0.55


class TestScaling:
    """峰值内存与速度随序列长度的变化"""

    @pytest.fixture(scope="class")
    def records(self):
        config = BenchConfig(variants=["full", "light", "s5"], seq_lens=SEQ_LENS, warmup=1, runs=3)
        return sweep(config=config)

    def _own(self, records, name):
        return [r for r in records if r.variant == name]

    def test_memory_slopes(self, records):
        assert loglog_slope(self._own(records, "full"), "peak_mem") <= 1.3
        assert loglog_slope(self._own(records, "s5"), "peak_mem") >= 1.7

    def test_attention_hits_default_cap_first(self, records):
        assert not any(r.oom for r in self._own(records, "full"))
        assert not any(r.oom for r in self._own(records, "light"))
        s5 = {r.seq_len: r.oom for r in self._own(records, "s5")}
        assert not s5[4096]
        assert s5[8192] and s5[12000]

    def test_speed_ordering(self, records):
        full = {r.seq_len: r.samples_per_ms for r in self._own(records, "full")}
        light = {r.seq_len: r.samples_per_ms for r in self._own(records, "light")}
        s5 = {r.seq_len: r.samples_per_ms for r in self._own(records, "s5")}
        for n in SEQ_LENS:
            assert light[n] > full[n], n
            if n >= 2048 and s5[n] > 0:
                assert full[n] > s5[n], n


if __name__ == "__main__":
    pytest.main([__file__, "-m", "slow"])
