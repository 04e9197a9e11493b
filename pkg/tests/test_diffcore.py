"""
测试可微数组引擎
"""

import numpy as np
import pytest

from eegm2.diffcore import (
    GradTape,
    Linear,
    MLP,
    Parameter,
    Tensor,
    grad_check,
    load_checkpoint_file,
    load_tensor,
    ops,
    save_checkpoint_file,
    save_tensor,
    tracker,
)
from eegm2.exceptions import CheckpointError, OutOfMemoryError, ShapeError


class TestGradTape:
    """测试梯度带"""

    def test_square_gradient(self):
        """y = sum(x²) 的梯度为 2x"""
        x = Parameter(np.array([1.0, -2.0, 3.0]), dtype="float64")
        with GradTape() as tape:
            y = ops.tensor_sum(x * x)
        (grad,) = tape.gradient(y, [x])
        np.testing.assert_allclose(grad, [2.0, -4.0, 6.0])

    def test_unused_parameter_gets_zero(self):
        """未参与计算的参数梯度为零"""
        x = Parameter(np.ones(3), dtype="float64")
        unused = Parameter(np.ones(2), dtype="float64")
        with GradTape() as tape:
            y = ops.tensor_sum(x * 3.0)
        gx, gu = tape.gradient(y, [x, unused])
        np.testing.assert_allclose(gx, [3.0, 3.0, 3.0])
        np.testing.assert_array_equal(gu, np.zeros(2))

    def test_no_tape_records_nothing(self):
        """梯度带之外不记录计算图"""
        x = Parameter(np.ones(3), dtype="float64")
        y = x * 2.0
        assert not y.requires_grad

    def test_shared_subexpression_accumulates(self):
        """同一张量被使用两次时梯度累加"""
        x = Parameter(np.array([2.0]), dtype="float64")
        with GradTape() as tape:
            h = x * x
            y = ops.tensor_sum(h + h)
        (grad,) = tape.gradient(y, [x])
        np.testing.assert_allclose(grad, [8.0])


class TestOpsGradients:
    """用中心差分检验各运算的梯度（float64）"""

    def setup_method(self):
        self.rng = np.random.default_rng(0)

    def _param(self, *shape):
        return Parameter(self.rng.standard_normal(shape), dtype="float64")

    def test_elementwise(self):
        x = self._param(3, 4)
        f = lambda: ops.tensor_sum(ops.silu(x) * ops.softplus(x) + ops.sigmoid(x))  # noqa: E731
        assert grad_check(f, [x]) < 1e-6

    def test_conv1d(self):
        x = self._param(2, 3, 10)
        w = self._param(4, 3, 3)
        b = self._param(4)
        f = lambda: ops.tensor_sum(ops.conv1d(x, w, b) ** 2)  # noqa: E731
        assert grad_check(f, [x, w, b]) < 1e-6

    def test_layernorm(self):
        x = self._param(2, 5, 6)
        gamma = self._param(6)
        beta = self._param(6)
        target = self.rng.standard_normal((2, 5, 6))
        f = lambda: ops.tensor_sum(ops.layernorm(x, gamma, beta) * target)  # noqa: E731
        assert grad_check(f, [x, gamma, beta]) < 1e-6

    def test_einsum(self):
        a = self._param(2, 3, 4)
        b = self._param(2, 4, 5)
        f = lambda: ops.tensor_sum(ops.einsum("bij,bjk->bik", a, b) ** 2)  # noqa: E731
        assert grad_check(f, [a, b]) < 1e-6

    def test_rfft_mag(self):
        x = self._param(2, 3, 16)
        f = lambda: ops.tensor_sum(ops.rfft_mag(x) ** 2)  # noqa: E731
        assert grad_check(f, [x]) < 1e-6

    def test_interp_upsample(self):
        x = self._param(1, 2, 5)
        target = self.rng.standard_normal((1, 2, 10))
        f = lambda: ops.tensor_sum(ops.interp_upsample(x, 10) * target)  # noqa: E731
        assert grad_check(f, [x]) < 1e-6

    def test_max_pool(self):
        x = self._param(2, 3, 8)
        target = self.rng.standard_normal((2, 3, 4))
        f = lambda: ops.tensor_sum(ops.max_pool1d(x, 2) * target)  # noqa: E731
        assert grad_check(f, [x]) < 1e-6

    def test_log_softmax(self):
        x = self._param(4, 3)
        target = self.rng.standard_normal((4, 3))
        f = lambda: ops.tensor_sum(ops.log_softmax(x, axis=-1) * target)  # noqa: E731
        assert grad_check(f, [x]) < 1e-6


class TestOpsValues:
    """测试运算的前向取值"""

    def test_rfft_magnitudes(self):
        """[1,1,1,1] 的幅度谱为 [4, 0, 0]"""
        mag = ops.rfft_mag(Tensor(np.ones((1, 1, 4))))
        np.testing.assert_allclose(mag.data[0, 0], [4.0, 0.0, 0.0], atol=1e-12)

    def test_rfft_alternating(self):
        mag = ops.rfft_mag(Tensor(np.array([[[1.0, -1.0, 1.0, -1.0]]])))
        np.testing.assert_allclose(mag.data[0, 0], [0.0, 0.0, 4.0], atol=1e-12)

    def test_conv_cross_correlation(self):
        """[0,0,1,0,0] 与 [1,2,3] 互相关 → [0,3,2,1,0]"""
        x = Tensor(np.array([[[0.0, 0.0, 1.0, 0.0, 0.0]]]))
        w = Tensor(np.array([[[1.0, 2.0, 3.0]]]))
        np.testing.assert_allclose(ops.conv1d(x, w).data[0, 0], [0.0, 3.0, 2.0, 1.0, 0.0])

    def test_linear_values(self):
        out = ops.linear(Tensor(np.array([1.0, 2.0])), Tensor(np.array([[1.0, 1.0], [0.0, 1.0]])),
                         Tensor(np.array([1.0, 0.0])))
        np.testing.assert_allclose(out.data, [4.0, 2.0])

    def test_layernorm_values(self):
        ones = Tensor(np.ones(2))
        zeros = Tensor(np.zeros(2))
        out = ops.layernorm(Tensor(np.array([1.0, 3.0])), ones, zeros, eps=0.0)
        np.testing.assert_allclose(out.data, [-1.0, 1.0])
        constant = ops.layernorm(Tensor(np.full(4, 7.0)), Tensor(np.ones(4)), Tensor(np.zeros(4)))
        np.testing.assert_allclose(constant.data, 0.0)

    def test_max_pool_values(self):
        out = ops.max_pool1d(Tensor(np.array([[[1.0, 4.0, 2.0, 3.0]]])), 2)
        np.testing.assert_array_equal(out.data[0, 0], [4.0, 3.0])

    def test_interp_ramp(self):
        out = ops.interp_upsample(Tensor(np.array([[[0.0, 3.0, 6.0]]])), 5)
        np.testing.assert_allclose(out.data[0, 0], [0.0, 1.5, 3.0, 4.5, 6.0])

    def test_silu_at_zero(self):
        assert ops.silu(Tensor(np.zeros(1))).data[0] == 0.0

    def test_conv_same_padding_keeps_length(self):
        x = Tensor(np.ones((2, 3, 11)))
        w = Tensor(np.ones((5, 3, 7)))
        assert ops.conv1d(x, w).shape == (2, 5, 11)

    def test_conv_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            ops.conv1d(Tensor(np.ones((1, 1, 5))), Tensor(np.ones((1, 1, 2))))

    def test_max_pool_tie_takes_first(self):
        """并列最大值时梯度流向最早的位置"""
        x = Parameter(np.array([[[1.0, 1.0, 0.0, 2.0]]]), dtype="float64")
        with GradTape() as tape:
            y = ops.tensor_sum(ops.max_pool1d(x, 2))
        (grad,) = tape.gradient(y, [x])
        np.testing.assert_array_equal(grad[0, 0], [1.0, 0.0, 0.0, 1.0])

    def test_interp_endpoints_aligned(self):
        out = ops.interp_upsample(Tensor(np.array([[[0.0, 1.0]]])), 5)
        np.testing.assert_allclose(out.data[0, 0], [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_einsum_ellipsis_rejected(self):
        with pytest.raises(ValueError):
            ops.einsum("...i,...i->...", Tensor(np.ones(3)), Tensor(np.ones(3)))


class TestModules:
    """测试网络模块"""

    def test_linear_param_count(self):
        """Linear(3, 2) 有 8 个参数"""
        assert Linear(3, 2).num_parameters() == 8

    def test_state_dict_round_trip(self, tmp_path):
        """参数写入检查点再读回后逐位一致"""
        mlp = MLP(4, [8], 3, rng=np.random.default_rng(1), dtype="float64")
        path = tmp_path / "mlp.ckpt"
        save_checkpoint_file(path, {"kind": "mlp"}, mlp.state_dict())
        header, tensors = load_checkpoint_file(path)
        assert header == {"kind": "mlp"}

        other = MLP(4, [8], 3, rng=np.random.default_rng(2), dtype="float64")
        assert other.param_hash() != mlp.param_hash()
        other.load_state_dict(tensors)
        assert other.param_hash() == mlp.param_hash()

    def test_load_state_dict_strict(self):
        mlp = MLP(4, [8], 3)
        state = mlp.state_dict()
        state.pop("fc0.bias")
        with pytest.raises(CheckpointError):
            mlp.load_state_dict(state)

    def test_freeze(self):
        mlp = MLP(4, [8], 3)
        mlp.freeze()
        assert mlp.num_parameters(trainable_only=True) == 0
        mlp.unfreeze()
        assert mlp.num_parameters(trainable_only=True) == mlp.num_parameters()

    def test_forward_hook_observes_output(self):
        layer = Linear(3, 2, dtype="float64")
        seen = []
        with layer.register_forward_hook(lambda m, args, out: seen.append(out.shape)):
            layer(Tensor(np.ones((5, 3))))
        layer(Tensor(np.ones((5, 3))))
        assert seen == [(5, 2)]


class TestSerialization:
    """测试张量二进制格式"""

    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    def test_tensor_round_trip(self, tmp_path, dtype):
        array = np.random.default_rng(0).standard_normal((3, 5)).astype(dtype)
        path = tmp_path / "x.tsr"
        save_tensor(path, array)
        loaded = load_tensor(path)
        assert loaded.dtype == dtype
        np.testing.assert_array_equal(loaded, array)

    def test_truncated_tensor_rejected(self, tmp_path):
        path = tmp_path / "x.tsr"
        save_tensor(path, np.ones((4, 4), dtype=np.float32))
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(CheckpointError):
            load_tensor(path)

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint_file(tmp_path / "missing.ckpt")


class TestMemoryTracker:
    """测试内存记账"""

    def test_peak_tracks_allocation(self):
        with tracker.measure() as t:
            before = t.peak_bytes
            x = Tensor(np.zeros(1000, dtype=np.float64))
            peak = t.peak_bytes
        del x
        assert peak - before >= 8000

    def test_cap_raises_out_of_memory(self):
        cap = tracker.live_bytes + 100
        with pytest.raises(OutOfMemoryError):
            with tracker.measure(cap):
                Tensor(np.zeros(1000, dtype=np.float64))
        assert tracker.cap_bytes is None

    def test_einsum_reserves_before_compute(self):
        a = Tensor(np.ones((200, 10)))
        b = Tensor(np.ones((10, 200)))
        with pytest.raises(OutOfMemoryError):
            with tracker.measure(tracker.live_bytes + 1000):
                ops.einsum("ij,jk->ik", a, b)

    def test_batch_scale_charges_each_allocation(self):
        start = tracker.live_bytes
        with tracker.measure(batch_scale=4) as t:
            x = Tensor(np.zeros(1000, dtype=np.float64))
            assert t.peak_bytes - start == 32000
        assert tracker.batch_scale == 1
        del x
        assert tracker.live_bytes == start

    def test_batch_scale_applies_to_cap(self):
        cap = tracker.live_bytes + 20000
        with tracker.measure(cap):
            Tensor(np.zeros(1000, dtype=np.float64))
        with pytest.raises(OutOfMemoryError):
            with tracker.measure(cap, batch_scale=4):
                Tensor(np.zeros(1000, dtype=np.float64))

    def test_batch_scale_must_be_positive(self):
        with pytest.raises(ValueError):
            with tracker.measure(batch_scale=0):
                pass


if __name__ == "__main__":
    pytest.main([__file__])
