import numpy as np
import pytest
import torch

from larkad.errors import ConfigurationError, ContractError
from larkad.model import (
    FeaturePyramid,
    ModelConfig,
    ReverseDistillationModel,
    load_weights,
    preset,
    save_weights,
)


class TestConfig:
    def test_default_matches_backbone_row(self):
        cfg = ModelConfig()
        assert cfg.stage_depths == ((0, 2), (2, 0), (8, 0))
        assert cfg.input_resolution == (256, 256)

    def test_channels_must_increase(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(stage_channels=(64, 64, 128))

    def test_resolution_divisibility(self):
        with pytest.raises(ConfigurationError):
            ModelConfig(input_resolution=(100, 100))

    @pytest.mark.parametrize("name", ["desk", "f", "p", "n", "t", "s"])
    def test_presets_construct(self, name):
        preset(name)


class TestEncoder:
    @pytest.mark.parametrize(
        "resolution,expected",
        [(256, [(64, 64), (32, 32), (16, 16)]), (224, [(56, 56), (28, 28), (14, 14)])],
    )
    def test_level_shapes(self, resolution, expected, tiny_config):
        cfg = ModelConfig(
            stage_depths=tiny_config.stage_depths,
            stage_channels=tiny_config.stage_channels,
            input_resolution=(resolution, resolution),
            lark_kernel=tiny_config.lark_kernel,
        )
        model = ReverseDistillationModel(cfg)
        pyr = model.encode(torch.randn(1, 3, resolution, resolution))
        assert [lvl.shape[2:] for lvl in pyr.levels] == [torch.Size(s) for s in expected]

    def test_indivisible_resolution_rejected(self, tiny_model):
        with pytest.raises(ContractError):
            tiny_model.encode(torch.randn(1, 3, 48, 48))

    def test_channels_and_finiteness(self, tiny_model, tiny_config):
        pyr = tiny_model.encode(torch.randn(2, 3, 32, 32))
        assert [lvl.shape[1] for lvl in pyr.levels] == list(tiny_config.stage_channels)
        assert pyr.all_finite()
        assert pyr.origin == "encoder"


class TestBottleneckAndDecoder:
    def test_embedding_one_stride_below_deepest(self):
        model = ReverseDistillationModel(preset("desk"))
        emb = model.bottleneck(model.encode(torch.randn(1, 3, 64, 64)))
        assert emb.shape[2:] == (2, 2)
        # paper-scale geometry: 256 -> embedding (8, 8)
        assert 256 // 32 == 8

    def test_zero_pyramid_finite(self, tiny_model, tiny_config):
        c1, c2, c3 = tiny_config.stage_channels
        levels = [torch.zeros(1, c1, 8, 8), torch.zeros(1, c2, 4, 4), torch.zeros(1, c3, 2, 2)]
        emb = tiny_model.bottleneck(FeaturePyramid(levels, "encoder"))
        assert torch.isfinite(emb).all()

    def test_batch_independence(self, tiny_model):
        x = torch.randn(3, 3, 32, 32)
        emb = tiny_model.bottleneck(tiny_model.encode(x))
        x2 = x.clone()
        x2[1] = torch.randn(3, 32, 32)
        emb2 = tiny_model.bottleneck(tiny_model.encode(x2))
        assert torch.equal(emb[0], emb2[0])
        assert torch.equal(emb[2], emb2[2])

    def test_decoder_origin_and_finiteness(self, tiny_model):
        enc, dec = tiny_model(torch.randn(1, 3, 32, 32))
        assert dec.origin == "decoder"
        assert dec.all_finite()

    def test_zero_embedding_finite(self, tiny_model, tiny_config):
        emb = torch.zeros(1, tiny_config.embedding_channels, 1, 1)
        dec = tiny_model.decoder(emb)
        assert dec.all_finite()

    def test_gradient_reaches_bottleneck(self, tiny_model):
        enc = tiny_model.encode(torch.randn(1, 3, 32, 32)).detach()
        dec = tiny_model.reconstruct(enc)
        probe = dec.levels[0][0, 0, 3, 3] + dec.levels[2][0, 1, 0, 0]
        probe.backward()
        grads = [p.grad for p in tiny_model.bottleneck.parameters() if p.grad is not None]
        assert grads and any(float(g.abs().sum()) > 0 for g in grads)


class TestMirroring:
    @pytest.mark.parametrize("seed", range(4))
    def test_random_configs_mirror(self, seed):
        rng = np.random.default_rng(seed)
        channels = tuple(int(c) for c in np.cumsum(rng.integers(2, 6, size=3)))
        depths = tuple(
            (int(rng.integers(0, 2)), int(rng.integers(0, 2) + (1 if i == 0 else 0)))
            for i in range(3)
        )
        depths = tuple((max(l, 1 - s), s) for l, s in depths)  # at least one block per stage
        cfg = ModelConfig(
            stage_depths=depths,
            stage_channels=channels,
            input_resolution=(32, 32),
            lark_kernel=int(rng.choice([3, 5, 7])),
        )
        model = ReverseDistillationModel(cfg)
        enc, dec = model(torch.randn(2, 3, 32, 32))
        assert enc.shapes() == dec.shapes()


class TestPyramidType:
    def test_level_count_enforced(self):
        with pytest.raises(ContractError):
            FeaturePyramid([torch.zeros(1, 2, 8, 8)], "encoder")

    def test_halving_enforced(self):
        with pytest.raises(ContractError):
            FeaturePyramid(
                [torch.zeros(1, 2, 8, 8), torch.zeros(1, 2, 5, 5), torch.zeros(1, 2, 2, 2)],
                "encoder",
            )


class TestWeightArchive:
    def test_bit_exact_roundtrip(self, tiny_model, tmp_path):
        save_weights(tiny_model, tmp_path / "arc")
        loaded = load_weights(tmp_path / "arc")
        state = tiny_model.state_dict()
        assert set(loaded) == set(state)
        for name, tensor in state.items():
            assert loaded[name].shape == tensor.shape
            assert torch.equal(
                loaded[name].view(torch.int32), tensor.detach().view(torch.int32)
            ), f"bit mismatch in {name}"

    def test_manifest_is_text(self, tiny_model, tmp_path):
        save_weights(tiny_model, tmp_path / "arc")
        lines = (tmp_path / "arc" / "manifest.txt").read_text().strip().splitlines()
        assert len(lines) == len(tiny_model.state_dict())
        name, dims, dtype, offset = lines[0].split("\t")
        assert dtype == "float32"
        assert offset == "0"
