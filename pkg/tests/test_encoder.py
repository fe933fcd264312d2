import pytest
import torch

import rgbdsod as R
from rgbdsod.encoder import BackboneConfig, ToyBackbone, build_backbone, encode, he_normal_init_
from rgbdsod.errors import ConfigError, ContractViolation


@pytest.fixture(scope="module")
def backbone():
    bb = ToyBackbone(BackboneConfig(channels_per_level=(4, 4, 8, 8, 8, 8)))
    he_normal_init_(bb, seed=0)
    return bb


class TestPyramidShapes:
    @pytest.mark.parametrize("size", [32, 64])
    def test_ratio_sequence(self, backbone, size):
        levels = encode(torch.randn(2, 3, size, size), backbone)
        assert len(levels) == 6
        expected = [size, size // 2, size // 4, size // 8, size // 16, size // 16]
        for lvl, hw, ch in zip(levels, expected, backbone.out_channels):
            assert tuple(lvl.shape) == (2, ch, hw, hw)

    def test_two_coarsest_levels_share_resolution(self, backbone):
        levels = encode(torch.randn(2, 3, 32, 32), backbone)
        assert levels[4].shape[-2:] == levels[5].shape[-2:]

    def test_batch_dimension_preserved(self, backbone):
        levels = encode(torch.randn(4, 3, 32, 32), backbone)
        assert all(lvl.shape[0] == 4 for lvl in levels)


class TestSiamesePropagation:
    def test_swap_equivariance_bit_exact(self, backbone):
        pair = torch.randn(2, 3, 32, 32)
        levels = encode(pair, backbone)
        swapped = encode(pair.flip(0), backbone)
        for lvl, s_lvl in zip(levels, swapped):
            assert torch.equal(lvl.flip(0), s_lvl)

    def test_different_slices_give_different_features(self, backbone):
        pair = torch.randn(2, 3, 32, 32)
        levels = encode(pair, backbone)
        assert not torch.equal(levels[0][0], levels[0][1])

    def test_single_parameter_set(self, backbone):
        # one backbone regardless of modality count: no duplicated stage names
        names = [n for n, _ in backbone.named_parameters()]
        assert len(names) == len(set(names))
        assert all(n.startswith("stages.") for n in names)


class TestValidation:
    def test_indivisible_size_rejected(self, backbone):
        with pytest.raises(ConfigError):
            encode(torch.randn(2, 3, 40, 40), backbone)

    def test_wrong_channel_count_rejected(self, backbone):
        with pytest.raises(ContractViolation):
            encode(torch.randn(2, 4, 32, 32), backbone)

    def test_decreasing_channels_rejected(self):
        with pytest.raises(ConfigError):
            BackboneConfig(channels_per_level=(16, 8, 8, 8, 8, 8))

    def test_wrong_level_count_rejected(self):
        with pytest.raises(ConfigError):
            BackboneConfig(channels_per_level=(8, 8, 8))

    def test_unknown_backbone_name(self):
        with pytest.raises(ConfigError, match="registered"):
            build_backbone("resnet-from-nowhere")


class TestRegistryHook:
    def test_registered_builder_is_used(self):
        class Stub(ToyBackbone):
            pass

        R.register_backbone("stub", Stub)
        assert isinstance(build_backbone("stub"), Stub)


class TestInit:
    def test_seed_determinism(self):
        a = ToyBackbone()
        b = ToyBackbone()
        he_normal_init_(a, seed=5)
        he_normal_init_(b, seed=5)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_different_seeds_differ(self):
        a = ToyBackbone()
        b = ToyBackbone()
        he_normal_init_(a, seed=5)
        he_normal_init_(b, seed=6)
        assert any(
            not torch.equal(pa, pb) for pa, pb in zip(a.parameters(), b.parameters())
        )

    def test_fan_in_scaling(self):
        bb = ToyBackbone()
        he_normal_init_(bb, seed=0)
        w = bb.stages[2].conv2.weight  # 64 <- 64, 3x3: fan_in 576
        assert w.std().item() == pytest.approx((2.0 / 576) ** 0.5, rel=0.1)
        assert bb.stages[0].conv1.bias.abs().sum() == 0
