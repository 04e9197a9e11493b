"""
测试优化器、学习率调度与预训练循环
"""

import json
import math

import numpy as np
import pandas as pd
import pytest

from eegm2.arch import build_variant, load_checkpoint
from eegm2.config import ArchConfig, OptimConfig
from eegm2.data import SignalBatch
from eegm2.diffcore import Parameter
from eegm2.exceptions import DivergenceError, ShapeError
from eegm2.train import (
    AdamW,
    Pretrainer,
    TrainState,
    adamw_step,
    evaluate_reconstruction,
    learning_rate,
    mean_predictor_acmse,
    onecycle_lr,
    pretrain,
    state_path_for,
)


def small_model(seed=0):
    return build_variant(ArchConfig.preset("tiny", in_channels=4), seed=seed, dtype="float64")


class TestSchedule:
    """测试 OneCycle 学习率"""

    def setup_method(self):
        self.config = OptimConfig()
        self.total = 1000

    def test_start_value(self):
        assert onecycle_lr(0, self.total, self.config) == pytest.approx(5e-5)

    def test_peak_value(self):
        assert onecycle_lr(round(0.30 * self.total), self.total, self.config) == pytest.approx(5e-4)

    def test_final_value(self):
        assert onecycle_lr(self.total - 1, self.total, self.config) == pytest.approx(5e-8)

    def test_monotone_pieces(self):
        lrs = np.array([onecycle_lr(s, self.total, self.config) for s in range(self.total)])
        peak = round(0.30 * self.total)
        assert np.all(np.diff(lrs[:peak + 1]) >= 0)
        assert np.all(np.diff(lrs[peak:]) <= 0)
        assert lrs.max() == pytest.approx(5e-4)

    def test_step_out_of_range(self):
        with pytest.raises(ValueError):
            onecycle_lr(self.total, self.total, self.config)
        with pytest.raises(ValueError):
            onecycle_lr(-1, self.total, self.config)

    def test_constant_schedule(self):
        config = OptimConfig(schedule="constant")
        assert learning_rate(123, self.total, config) == config.init_lr

    def test_learning_rate_clamps_to_last_step(self):
        assert learning_rate(5000, self.total, self.config) == pytest.approx(5e-8)


class TestAdamW:
    """测试 AdamW 更新"""

    def setup_method(self):
        self.config = OptimConfig()

    def test_decay_only(self):
        """零梯度时只有权重衰减：1 - 1e-3·1e-2"""
        w = Parameter(np.array([1.0]), dtype="float64")
        assert adamw_step([("w", w)], [np.zeros(1)], TrainState(), 1e-3, self.config)
        np.testing.assert_allclose(w.data, [0.99999])

    def test_first_step(self):
        """偏差校正后第一步的更新量约为 -lr"""
        w = Parameter(np.array([0.0]), dtype="float64")
        adamw_step([("w", w)], [np.ones(1)], TrainState(), 1e-3, self.config)
        np.testing.assert_allclose(w.data, [-1e-3 / (1.0 + 1e-8)], rtol=1e-12)

    def test_zero_grad_zero_decay_is_identity(self):
        config = OptimConfig(weight_decay=0.0)
        w = Parameter(np.array([0.3, -2.0]), dtype="float64")
        adamw_step([("w", w)], [np.zeros(2)], TrainState(), 1e-3, config)
        np.testing.assert_array_equal(w.data, [0.3, -2.0])

    def test_identical_params_update_identically(self):
        a = Parameter(np.array([0.5, 1.5]), dtype="float64")
        b = Parameter(np.array([0.5, 1.5]), dtype="float64")
        optimizer = AdamW([("a", a), ("b", b)], self.config)
        grad = np.array([0.2, -0.7])
        for _ in range(3):
            optimizer.step([grad, grad.copy()], 1e-2)
        np.testing.assert_array_equal(a.data, b.data)

    def test_non_finite_gradient_skips_step(self):
        w = Parameter(np.array([1.0, 2.0]), dtype="float64")
        state = TrainState()
        applied = adamw_step([("w", w)], [np.array([np.nan, 0.0])], state, 1e-3, self.config)
        assert not applied
        assert state.step == 0
        assert state.skipped_steps == 1
        np.testing.assert_array_equal(w.data, [1.0, 2.0])

    def test_gradient_shape_mismatch(self):
        w = Parameter(np.zeros(3), dtype="float64")
        with pytest.raises(ShapeError):
            adamw_step([("w", w)], [np.zeros(2)], TrainState(), 1e-3, self.config)

    def test_frozen_parameter_untouched(self):
        w = Parameter(np.ones(2), dtype="float64")
        w.requires_grad = False
        adamw_step([("w", w)], [np.ones(2)], TrainState(), 1e-3, self.config)
        np.testing.assert_array_equal(w.data, [1.0, 1.0])


class TestTrainState:
    """测试训练状态读写"""

    def test_round_trip(self, tmp_path):
        state = TrainState(step=12, epoch=3, seed=7, epoch_times=[0.5, 0.6], skipped_steps=1)
        state.m["w"] = np.arange(4.0)
        state.v["w"] = np.arange(4.0) ** 2
        state.save(tmp_path / "run.state")
        loaded = TrainState.load(tmp_path / "run.state")
        assert (loaded.step, loaded.epoch, loaded.seed, loaded.skipped_steps) == (12, 3, 7, 1)
        assert math.isinf(loaded.best_val_loss)
        assert loaded.epoch_times == [0.5, 0.6]
        np.testing.assert_array_equal(loaded.v["w"], state.v["w"])
        assert loaded.initial_loss is None

    def test_initial_loss_round_trip(self, tmp_path):
        TrainState(step=3, epoch=1, initial_loss=0.25).save(tmp_path / "run.state")
        assert TrainState.load(tmp_path / "run.state").initial_loss == 0.25

    def test_state_path_next_to_checkpoint(self, tmp_path):
        assert state_path_for(tmp_path / "model.ckpt") == tmp_path / "model.state"


class TestPretrainer:
    """测试预训练循环"""

    def setup_method(self):
        self.optim = OptimConfig(epochs=4, batch_size=4, max_lr=5e-3)

    def test_loss_decreases_and_files_written(self, small_batch, tmp_path):
        trainer = Pretrainer(small_model(), self.optim, seed=0, output_dir=tmp_path)
        result = trainer.fit(small_batch, checkpoint_path=tmp_path / "model.ckpt")

        assert len(result.history) == 4
        assert result.history[-1]["train_loss"] < result.history[0]["train_loss"]
        assert result.state.epoch == 4
        assert result.checkpoint == tmp_path / "model.ckpt"
        assert (tmp_path / "model.state").exists()
        assert result.mean_epoch_seconds > 0

        lines = (tmp_path / "metrics.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 4
        record = json.loads(lines[0])
        for key in ("epoch", "train_loss", "val_loss", "acmse", "seconds"):
            assert key in record
        curve = pd.read_csv(tmp_path / "loss_curve.csv")
        assert list(curve["epoch"]) == [1, 2, 3, 4]

    def test_reproducible(self, small_batch):
        optim = OptimConfig(epochs=2, batch_size=8)
        first = Pretrainer(small_model(), optim, seed=1).fit(small_batch)
        second = Pretrainer(small_model(), optim, seed=1).fit(small_batch)
        assert [r["train_loss"] for r in first.history] == [r["train_loss"] for r in second.history]
        assert [r["val_loss"] for r in first.history] == [r["val_loss"] for r in second.history]

    def test_resume_continues_steps(self, small_batch, tmp_path):
        checkpoint = tmp_path / "model.ckpt"
        first = pretrain(small_model(), small_batch, OptimConfig(epochs=2, batch_size=8),
                         output_dir=tmp_path, checkpoint_path=checkpoint)
        steps_after_first = first.state.step

        model = load_checkpoint(checkpoint).model
        second = pretrain(model, small_batch, OptimConfig(epochs=3, batch_size=8),
                          output_dir=tmp_path, checkpoint_path=checkpoint, resume=True)
        assert len(second.history) == 1
        assert second.history[0]["epoch"] == 3
        assert second.state.step > steps_after_first
        assert len(pd.read_csv(tmp_path / "loss_curve.csv")) == 3
        assert len((tmp_path / "metrics.jsonl").read_text(encoding="utf-8").splitlines()) == 3

    def test_resume_requires_state(self, small_batch, tmp_path):
        with pytest.raises(FileNotFoundError):
            pretrain(small_model(), small_batch, checkpoint_path=tmp_path / "none.ckpt", resume=True)

    def test_channel_mismatch(self, small_batch, tiny_model):
        with pytest.raises(ShapeError):
            Pretrainer(tiny_model).fit(small_batch)

    def test_divergence_aborts(self, small_batch):
        trainer = Pretrainer(small_model(), OptimConfig(epochs=1, batch_size=4))
        values = iter([1.0, 2.0, 5000.0, 1.0, 1.0])
        trainer._train_step = lambda x, lr: next(values)
        with pytest.raises(DivergenceError):
            trainer.fit(small_batch)

    def test_first_loss_recorded_in_state(self, small_batch, tmp_path):
        trainer = Pretrainer(small_model(), OptimConfig(epochs=1, batch_size=4))
        values = iter([3.0] + [1.0] * 20)
        trainer._train_step = lambda x, lr: next(values)
        result = trainer.fit(small_batch, checkpoint_path=tmp_path / "model.ckpt")
        assert result.state.initial_loss == 3.0
        assert TrainState.load(tmp_path / "model.state").initial_loss == 3.0

    def test_resumed_divergence_uses_original_baseline(self, small_batch):
        """续训时以首次训练的初始损失为基准"""
        state = TrainState(initial_loss=1.0)
        trainer = Pretrainer(small_model(), OptimConfig(epochs=1, batch_size=4), state=state)
        trainer._train_step = lambda x, lr: 2000.0
        with pytest.raises(DivergenceError):
            trainer.fit(small_batch)

    def test_non_finite_loss_aborts(self, small_batch):
        trainer = Pretrainer(small_model(), OptimConfig(epochs=1, batch_size=4))
        trainer._train_step = lambda x, lr: float("nan")
        with pytest.raises(DivergenceError):
            trainer.fit(small_batch)


class TestEvaluation:
    """测试验证评估"""

    def test_evaluation_does_not_mutate(self, small_batch):
        model = small_model()
        before = model.param_hash()
        metrics = evaluate_reconstruction(model, small_batch)
        assert model.param_hash() == before
        assert metrics["loss"] > 0
        assert metrics["acmse"] > 0

    def test_evaluation_with_padding(self):
        """长度不是 4 的倍数时评估也能进行"""
        model = small_model()
        batch = SignalBatch(np.random.default_rng(0).standard_normal((3, 4, 37)).astype(np.float32))
        metrics = evaluate_reconstruction(model, batch)
        assert np.isfinite(metrics["loss"])

    def test_empty_batch(self):
        metrics = evaluate_reconstruction(small_model(), SignalBatch(np.zeros((0, 4, 32))))
        assert math.isnan(metrics["loss"])

    def test_mean_predictor(self):
        train = SignalBatch(np.tile(np.array([1.0, 2.0])[None, :, None], (3, 1, 8)))
        test = SignalBatch(np.tile(np.array([1.0, 4.0])[None, :, None], (2, 1, 8)))
        assert mean_predictor_acmse(train, test) == pytest.approx(2.0)


if __name__ == "__main__":
    pytest.main([__file__])
