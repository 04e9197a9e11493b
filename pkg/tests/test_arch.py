"""
测试网络结构与检查点
"""

import numpy as np
import pytest

from eegm2.arch import (
    EEGM2,
    MultiScaleEmbed,
    analytic_param_count,
    branch_widths,
    build_variant,
    load_checkpoint,
    save_checkpoint,
)
from eegm2.config import AMode, ArchConfig, VariantId
from eegm2.diffcore import GradTape, Tensor, grad_check, ops
from eegm2.exceptions import CheckpointError, ConfigError, ShapeError
from eegm2.ssd import AttentionBlock, Mamba2Block


class TestArchConfig:
    """测试结构配置"""

    def test_widths_must_increase(self):
        with pytest.raises(ValueError):
            ArchConfig(in_channels=2, stage_widths=[12, 6, 24])

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            ArchConfig.preset("huge")

    @pytest.mark.parametrize("name,expected", [("S2", VariantId.S2), ("eegm2-s5", VariantId.S5),
                                               ("full", VariantId.FULL)])
    def test_variant_aliases(self, name, expected):
        assert VariantId(name) is expected

    def test_variant_switches(self):
        base = ArchConfig.preset("tiny", 2)
        assert not base.with_variant("s1").uses_multiscale
        assert not base.with_variant("s4").uses_multiscale
        assert base.with_variant("s3").a_mode == AMode.DIAGONAL_PER_CHANNEL
        assert base.with_variant("s5").uses_attention
        assert base.with_variant("s2").a_mode == AMode.SCALAR_PER_HEAD


class TestEmbedding:
    """测试多尺度嵌入"""

    def test_branch_widths_sum_to_d1(self):
        assert branch_widths(32) == (12, 10, 10)
        assert sum(branch_widths(128)) == 128
        with pytest.raises(ShapeError):
            branch_widths(2)

    def test_length_preserved(self):
        embed = MultiScaleEmbed(14, 12, dtype="float64")
        out = embed(Tensor(np.random.default_rng(0).standard_normal((2, 14, 256))))
        assert out.shape == (2, 12, 256)

    def test_zero_input_gives_bias(self):
        embed = MultiScaleEmbed(3, 9, dtype="float64")
        out = embed(Tensor(np.zeros((1, 3, 10)))).data
        bias = np.concatenate([embed.conv_k1.bias.data, embed.conv_k3.bias.data, embed.conv_k7.bias.data])
        np.testing.assert_allclose(out[0], np.repeat(bias[:, None], 10, axis=1))

    def test_single_kernel_shape(self):
        embed = MultiScaleEmbed(14, 12, multiscale=False, dtype="float64")
        assert embed(Tensor(np.zeros((2, 14, 32)))).shape == (2, 12, 32)


class TestEEGM2:
    """测试完整网络"""

    def setup_method(self):
        self.rng = np.random.default_rng(0)

    def test_round_trip_shape(self, tiny_model):
        x = self.rng.standard_normal((2, 2, 64))
        assert tiny_model(x).shape == (2, 2, 64)

    def test_encoder_shapes(self, tiny_model):
        x = Tensor(self.rng.standard_normal((2, 2, 64)))
        z, skips = tiny_model.encoder(tiny_model.embed(x))
        assert z.shape == (2, 24, 16)
        assert skips[0].shape == (2, 6, 64)
        assert skips[1].shape == (2, 12, 32)
        assert tiny_model.mediator(z).shape == (2, 24, 16)

    def test_encoder_rejects_indivisible_length(self, tiny_model):
        with pytest.raises(ShapeError, match="补 2"):
            tiny_model.encoder(Tensor(np.zeros((1, 6, 30))))

    def test_padding_for_odd_length(self, tiny_model):
        """T 不是 4 的倍数时右侧补零，输出裁回原长度"""
        x = self.rng.standard_normal((1, 2, 37))
        assert tiny_model(x).shape == (1, 2, 37)
        padded, out, mask = tiny_model.forward_padded(x)
        assert padded.shape == (1, 2, 40)
        assert mask.sum() == 37

    def test_wrong_channels_rejected(self, tiny_model):
        with pytest.raises(ShapeError):
            tiny_model(np.zeros((1, 3, 32)))

    def test_too_short_rejected(self, tiny_model):
        with pytest.raises(ShapeError):
            tiny_model(np.zeros((1, 2, 4)))

    @pytest.mark.parametrize("variant", list(VariantId))
    def test_every_variant_preserves_shape(self, tiny_config, variant):
        model = build_variant(tiny_config.with_variant(variant), dtype="float64")
        x = self.rng.standard_normal((2, 2, 32))
        assert model(x).shape == x.shape

    def test_variant_block_types(self, tiny_config):
        full = build_variant(tiny_config)
        s5 = build_variant(tiny_config.with_variant("s5"))
        s3 = build_variant(tiny_config.with_variant("s3"))
        assert isinstance(full.encoder.stage1.block, Mamba2Block)
        assert isinstance(s5.encoder.stage1.block, AttentionBlock)
        assert s3.encoder.stage1.block.config.a_mode == AMode.DIAGONAL_PER_CHANNEL

    def test_s1_differs_only_in_embedding(self, tiny_config):
        full = build_variant(tiny_config)
        s1 = build_variant(tiny_config.with_variant("s1"))
        full_counts, s1_counts = full.summary(), s1.summary()
        assert full_counts["embed"] != s1_counts["embed"]
        for name in ("encoder", "mediator", "decoder", "head"):
            assert full_counts[name] == s1_counts[name]

    def test_skips_are_live(self, tiny_model):
        x = Tensor(self.rng.standard_normal((1, 2, 32)))
        z, skips = tiny_model.encoder(tiny_model.embed(x))
        med = tiny_model.mediator(z)
        out = tiny_model.decoder(med, skips).data
        zeroed = tiny_model.decoder(med, [ops.mul(s, 0.0) for s in skips]).data
        assert not np.allclose(out, zeroed)

    def test_skip_shape_mismatch(self, tiny_model):
        z = Tensor(np.zeros((1, 24, 8)))
        with pytest.raises(ShapeError):
            tiny_model.decoder(z, [Tensor(np.zeros((1, 6, 32))), Tensor(np.zeros((1, 12, 8)))])

    def test_zero_mediator_gives_zero(self, tiny_model):
        for proj in (tiny_model.mediator.proj_in, tiny_model.mediator.proj_out):
            proj.linear.weight.data[...] = 0.0
            proj.linear.bias.data[...] = 0.0
        z = Tensor(self.rng.standard_normal((1, 24, 8)))
        np.testing.assert_array_equal(tiny_model.mediator(z).data, 0.0)

    def test_gradient_reaches_encoder(self, tiny_model):
        x = Tensor(self.rng.standard_normal((1, 2, 32)))
        params = [p for _, p in tiny_model.encoder.named_parameters()]
        with GradTape() as tape:
            loss = ops.tensor_mean(tiny_model(x) ** 2)
        grads = tape.gradient(loss, params)
        assert any(np.any(g != 0) for g in grads)

    def test_end_to_end_gradient_check(self, tiny_model):
        """tiny 配置 (C=2, T=32) 的端到端梯度检验"""
        x = Tensor(self.rng.standard_normal((1, 2, 32)))
        f = lambda: ops.tensor_mean(tiny_model(x) ** 2)  # noqa: E731
        assert grad_check(f, list(tiny_model.named_parameters()), n_probe=2) < 1e-4

    def test_deterministic_init(self, tiny_config):
        a = build_variant(tiny_config, seed=3)
        b = build_variant(tiny_config, seed=3)
        assert a.param_hash() == b.param_hash()


class TestParamCount:
    """测试参数量"""

    @pytest.mark.parametrize("variant", list(VariantId))
    @pytest.mark.parametrize("preset", ["tiny", "light"])
    def test_analytic_matches_model(self, preset, variant):
        config = ArchConfig.preset(preset, in_channels=16, variant=variant)
        assert analytic_param_count(config) == EEGM2(config).num_parameters()

    def test_light_budget(self):
        """light 预设约 0.25M 参数（±10%）"""
        count = analytic_param_count(ArchConfig.preset("light", in_channels=16))
        assert count == 237_200
        assert abs(count - 250_000) / 250_000 < 0.10

    def test_full_budget(self):
        """full 预设约 4.5M 参数（±10%）"""
        count = analytic_param_count(ArchConfig.preset("full", in_channels=16))
        assert count == 4_596_304
        assert abs(count - 4_500_000) / 4_500_000 < 0.10


class TestCheckpoint:
    """测试检查点读写"""

    def test_round_trip(self, tiny_model, tmp_path):
        path = save_checkpoint(tmp_path / "model.ckpt", tiny_model, metadata={"step": 7},
                               extra_tensors={"head.w": np.ones((2, 3))})
        checkpoint = load_checkpoint(path)
        assert checkpoint.model.param_hash() == tiny_model.param_hash()
        assert checkpoint.header["metadata"]["step"] == 7
        np.testing.assert_array_equal(checkpoint.extra["head.w"], np.ones((2, 3)))

        x = np.random.default_rng(0).standard_normal((1, 2, 32))
        np.testing.assert_array_equal(checkpoint.model(x).data, tiny_model(x).data)

    def test_channel_mismatch(self, tiny_model, tmp_path):
        path = save_checkpoint(tmp_path / "model.ckpt", tiny_model)
        with pytest.raises(CheckpointError):
            load_checkpoint(path, in_channels=5)

    def test_extra_name_collision(self, tiny_model, tmp_path):
        name = next(iter(tiny_model.state_dict()))
        with pytest.raises(CheckpointError):
            save_checkpoint(tmp_path / "model.ckpt", tiny_model, extra_tensors={name: np.ones(1)})

    def test_dtype_conversion(self, tiny_model, tmp_path):
        path = save_checkpoint(tmp_path / "model.ckpt", tiny_model)
        assert load_checkpoint(path, dtype="float32").model.dtype == np.float32


if __name__ == "__main__":
    pytest.main([__file__])
