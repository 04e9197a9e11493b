"""
测试选择性扫描与序列块
"""

import time

import numpy as np
import pytest

from eegm2.config import AMode, SSDConfig
from eegm2.diffcore import Tensor, grad_check, ops, tracker
from eegm2.exceptions import NonFiniteError, OutOfMemoryError, ShapeError
from eegm2.ssd import AttentionBlock, Mamba2Block
from eegm2.ssd.blocks import decay_factor
from eegm2.ssd.scan import scan_chunked, scan_naive


def random_scan_inputs(rng, batch=2, length=17, heads=2, p=3, n=4, per_channel=False):
    x = rng.standard_normal((batch, length, heads, p))
    a_shape = (batch, length, heads, p) if per_channel else (batch, length, heads)
    a = rng.uniform(0.5, 0.99, size=a_shape)
    b = rng.standard_normal((batch, length, n))
    c = rng.standard_normal((batch, length, n))
    return x, a, b, c


def rel_err(actual, expected):
    return float(np.max(np.abs(actual - expected) / (1.0 + np.abs(expected))))


class TestScan:
    """测试扫描的两种实现"""

    def setup_method(self):
        self.rng = np.random.default_rng(0)

    def test_integrator(self):
        """A=B=C=1, x=[1,2,3] → 累加和 [1,3,6]"""
        x = np.array([[[1.0], [2.0], [3.0]]])
        ones = np.ones((1, 3))
        b = np.ones((1, 3, 1))
        np.testing.assert_allclose(scan_naive(x, ones, b, b)[0, :, 0], [1.0, 3.0, 6.0])
        np.testing.assert_allclose(scan_chunked(x, ones, b, b, chunk=2).data[0, :, 0], [1.0, 3.0, 6.0])

    def test_memoryless(self):
        """A=0 时 y_t = (C_t·B_t) x_t"""
        x, _, b, c = random_scan_inputs(self.rng)
        a = np.zeros(x.shape[:3])
        expected = np.einsum("btn,btn->bt", c, b)[:, :, None, None] * x
        np.testing.assert_allclose(scan_naive(x, a, b, c), expected, atol=1e-12)
        np.testing.assert_allclose(scan_chunked(x, a, b, c, chunk=4).data, expected, atol=1e-12)

    @pytest.mark.parametrize("chunk", [1, 4, 5, 17, 64])
    def test_chunked_matches_naive(self, chunk):
        x, a, b, c = random_scan_inputs(self.rng)
        assert rel_err(scan_chunked(x, a, b, c, chunk=chunk).data, scan_naive(x, a, b, c)) < 1e-10

    def test_per_channel_decay(self):
        x, a, b, c = random_scan_inputs(self.rng, per_channel=True)
        assert rel_err(scan_chunked(x, a, b, c, chunk=5).data, scan_naive(x, a, b, c)) < 1e-10

    def test_float32_tolerance(self):
        x, a, b, c = [v.astype(np.float32) for v in random_scan_inputs(self.rng, length=40)]
        assert rel_err(scan_chunked(x, a, b, c, chunk=8).data, scan_naive(x, a, b, c)) < 1e-5

    def test_long_sequence_chunk_sizes_agree(self):
        """T=1000 时 chunk=64 与 chunk=128 的结果一致"""
        x, a, b, c = random_scan_inputs(self.rng, batch=1, length=1000, heads=1, p=2, n=4)
        y64 = scan_chunked(x, a, b, c, chunk=64).data
        y128 = scan_chunked(x, a, b, c, chunk=128).data
        assert rel_err(y64, y128) < 1e-5

    def test_linear_in_input(self):
        x1, a, b, c = random_scan_inputs(self.rng)
        x2 = self.rng.standard_normal(x1.shape)
        combined = scan_chunked(2.0 * x1 - 3.0 * x2, a, b, c, chunk=4).data
        separate = 2.0 * scan_chunked(x1, a, b, c, chunk=4).data - 3.0 * scan_chunked(x2, a, b, c, chunk=4).data
        assert rel_err(combined, separate) < 1e-6

    def test_three_dimensional_input(self):
        """[B, T, D] 视为单头"""
        x = self.rng.standard_normal((2, 9, 3))
        a = self.rng.uniform(0.5, 0.9, size=(2, 9))
        b = self.rng.standard_normal((2, 9, 4))
        y = scan_chunked(x, a, b, b, chunk=4).data
        assert y.shape == x.shape
        assert rel_err(y, scan_naive(x, a, b, b)) < 1e-10

    def test_shape_mismatch(self):
        x, a, b, c = random_scan_inputs(self.rng)
        with pytest.raises(ShapeError):
            scan_naive(x, a[:, :-1], b, c)

    def test_non_finite_state_reports_position(self):
        x, a, b, c = random_scan_inputs(self.rng, batch=1, length=6)
        x[0, 3] = np.inf
        with pytest.raises(NonFiniteError) as info:
            scan_naive(x, a, b, c)
        assert info.value.position == 3

    def test_invalid_chunk(self):
        x, a, b, c = random_scan_inputs(self.rng)
        with pytest.raises(ValueError):
            scan_chunked(x, a, b, c, chunk=0)

    @pytest.mark.slow
    def test_chunked_time_linear_in_length(self):
        """固定块长时，T 每翻倍单样本耗时增长不超过 1.3 倍"""
        per_sample = []
        for length in (1024, 2048, 4096, 8192, 16384):
            x, a, b, c = random_scan_inputs(self.rng, batch=1, length=length, heads=4, p=16, n=16)
            scan_chunked(x, a, b, c, chunk=64)
            timings = []
            for _ in range(5):
                start = time.perf_counter()
                scan_chunked(x, a, b, c, chunk=64)
                timings.append(time.perf_counter() - start)
            per_sample.append(float(np.median(timings)) / length)
        ratios = np.array(per_sample[1:]) / np.array(per_sample[:-1])
        assert np.all(ratios <= 1.3), ratios


class TestDecay:
    """测试离散化"""

    def test_closed_form(self):
        """dt = ln 2, exp(a_log) = 1 → A = 0.5"""
        a = decay_factor(Tensor(np.array([np.log(2.0)])), Tensor(np.array([0.0])))
        np.testing.assert_allclose(a.data, [0.5])

    def test_small_step_limit(self):
        a = decay_factor(Tensor(np.array([1e-9])), Tensor(np.array([1.0])))
        assert 0.0 < a.data[0] < 1.0
        np.testing.assert_allclose(a.data, [1.0], atol=1e-8)


class TestMamba2Block:
    """测试状态空间块"""

    def setup_method(self):
        self.config = SSDConfig(d_model=8, d_state=4, n_heads=2, chunk=8)
        self.rng = np.random.default_rng(0)

    def test_shape_preserved(self):
        block = Mamba2Block(SSDConfig(d_model=16, d_state=8, n_heads=4), dtype="float32")
        x = Tensor(self.rng.standard_normal((2, 16, 128)).astype(np.float32))
        assert block(x).shape == (2, 16, 128)

    def test_zero_output_projection_is_identity(self):
        block = Mamba2Block(self.config, dtype="float64")
        block.out_proj.weight.data[...] = 0.0
        block.out_proj.bias.data[...] = 0.0
        x = self.rng.standard_normal((2, 8, 32))
        np.testing.assert_array_equal(block(Tensor(x)).data, x)

    def test_wrong_width_rejected(self):
        block = Mamba2Block(self.config, dtype="float64")
        with pytest.raises(ShapeError):
            block(Tensor(np.zeros((1, 7, 16))))

    @pytest.mark.parametrize("a_mode", [AMode.SCALAR_PER_HEAD, AMode.DIAGONAL_PER_CHANNEL])
    def test_gradient_check(self, a_mode):
        """d=8, T=32, float64 下全部参数通过梯度检验"""
        config = self.config.model_copy(update={"a_mode": a_mode})
        block = Mamba2Block(config, rng=np.random.default_rng(1), dtype="float64")
        x = Tensor(self.rng.standard_normal((1, 8, 32)))
        f = lambda: ops.tensor_mean(block(x))  # noqa: E731
        assert grad_check(f, list(block.named_parameters()), n_probe=6) < 1e-4

    def test_decays_inside_unit_interval(self):
        block = Mamba2Block(self.config, dtype="float64")
        dt = Tensor(np.full((1, 4, 2), 0.05))
        a = decay_factor(dt, block.a_log).data
        assert np.all((a > 0) & (a < 1))


class TestAttentionBlock:
    """测试注意力块"""

    def setup_method(self):
        self.block = AttentionBlock(8, 2, rng=np.random.default_rng(0), dtype="float64")
        self.rng = np.random.default_rng(1)

    def test_shape_preserved(self):
        x = Tensor(self.rng.standard_normal((2, 8, 20)))
        assert self.block(x).shape == (2, 8, 20)

    def test_permutation_equivariant(self):
        """无位置编码：打乱时间顺序，输出以同样方式打乱"""
        x = self.rng.standard_normal((1, 8, 12))
        perm = self.rng.permutation(12)
        out = self.block(Tensor(x)).data
        out_perm = self.block(Tensor(x[:, :, perm])).data
        np.testing.assert_allclose(out_perm, out[:, :, perm], atol=1e-12)

    def test_single_token(self):
        """T=1 时注意力权重为 1，输出只依赖该位置"""
        x = self.rng.standard_normal((1, 8, 1))
        assert self.block(Tensor(x)).shape == (1, 8, 1)

    def test_score_matrices_reserved_upfront(self):
        """打分矩阵在分配前整体预检，超限时报出的申请量正是两张 T×T 矩阵"""
        x = Tensor(self.rng.standard_normal((1, 8, 128)))
        with tracker.measure(cap_bytes=tracker.live_bytes + 300_000):
            with pytest.raises(OutOfMemoryError) as info:
                self.block(x)
        assert info.value.requested_bytes == 2 * 1 * 2 * 128 * 128 * 8

    def test_heads_must_divide_width(self):
        with pytest.raises(ShapeError):
            AttentionBlock(8, 3)


if __name__ == "__main__":
    pytest.main([__file__])
