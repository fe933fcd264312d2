import dataclasses

import pytest

from rgbdsod.config import (
    TrainConfig,
    VARIANT_PRESETS,
    VariantConfig,
    load_config_file,
    make_configs,
    parse_config_text,
    validate_train,
    validate_variant,
    variant_from_dict,
    variant_preset,
    variant_to_dict,
)
from rgbdsod.errors import ConfigError


class TestPresets:
    def test_matrix_structure(self):
        assert variant_preset("A") == VariantConfig()
        assert variant_preset("C").fusion == "concat"
        d = variant_preset("D")
        assert (d.fusion, d.modalities) == ("identity", "rgb")
        e = variant_preset("E")
        assert (e.fusion, e.modalities) == ("identity", "d")
        assert variant_preset("F").learning == "separate"

    def test_every_preset_validates(self):
        for cfg in VARIANT_PRESETS.values():
            validate_variant(cfg)

    def test_aliases_and_case(self):
        assert variant_preset("rgb-only") == variant_preset("D")
        assert variant_preset("Depth-Only") == variant_preset("E")
        assert variant_preset("a") == variant_preset("A")
        assert variant_preset(" joint-cm-rgbd ") == variant_preset("A")

    def test_unknown_variant(self):
        with pytest.raises(ConfigError, match="unknown variant"):
            variant_preset("Z")


class TestVariantValidation:
    def test_default_is_valid(self):
        validate_variant(VariantConfig())

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"fusion": "sum"},
            {"modalities": "thermal"},
            {"learning": "frozen"},
            {"fusion": "identity"},  # identity with both streams
            {"modalities": "rgb"},  # both-stream fusion with one stream
            {"fusion": "concat", "modalities": "d"},
            {"learning": "separate", "fusion": "identity", "modalities": "rgb"},
            {"k": 0},
            {"k": -4},
            {"k": 6},  # not divisible by four
            {"input_size": 30},
            {"input_size": 48},  # not divisible by 32
            {"input_size": 0},
            {"coarse_loss_weight": -1.0},
            {"coarse_loss_weight": float("nan")},
            {"coarse_loss_weight": float("inf")},
            {"backbone_channels": (16, 32, 64)},
            {"backbone_channels": (16, 8, 64, 64, 64, 64)},  # decreasing
            {"backbone_channels": (16, 32, 64, 64, 0, 64)},
            {"dilation": 0},
            {"channel_mean": (0.5, 0.5)},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            validate_variant(VariantConfig(**kwargs))

    def test_stage6_may_shrink(self):
        # Only levels 1..5 must be non-decreasing; the dilated stage may not grow.
        validate_variant(VariantConfig(backbone_channels=(4, 8, 16, 16, 16, 8)))


class TestTrainValidation:
    def test_default_is_valid(self):
        validate_train(TrainConfig())

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lr": 0.0},
            {"lr": -1e-6},
            {"lr": float("inf")},
            {"momentum": 1.0},
            {"momentum": -0.1},
            {"weight_decay": -1e-4},
            {"epochs": 0},
            {"batch_size": 0},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            validate_train(TrainConfig(**kwargs))


class TestSerialization:
    def test_dict_round_trip_all_presets(self):
        for cfg in VARIANT_PRESETS.values():
            d = variant_to_dict(cfg)
            assert isinstance(d["backbone_channels"], list)
            assert variant_from_dict(d) == cfg

    def test_unknown_key_rejected(self):
        d = variant_to_dict(VariantConfig())
        d["depth_layers"] = 3
        with pytest.raises(ConfigError, match="unknown"):
            variant_from_dict(d)

    def test_partial_dict_fills_defaults(self):
        cfg = variant_from_dict({"fusion": "concat"})
        assert cfg.fusion == "concat" and cfg.k == 64


class TestConfigText:
    def test_parse_basics(self):
        text = """
        # a comment
        lr = 1e-5
        epochs=3   # trailing comment

        k = 8
        """
        assert parse_config_text(text) == {"lr": "1e-5", "epochs": "3", "k": "8"}

    def test_bad_line_reports_number(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("a = 1\nbroken line\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config_file(tmp_path / "none.cfg")

    def test_file_round_trip(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("variant = C\nlr = 2e-6\nmirror_augment = off\nk = 16\n")
        vcfg, tcfg = make_configs(load_config_file(p))
        assert vcfg.fusion == "concat" and vcfg.k == 16
        assert tcfg.lr == 2e-6 and tcfg.mirror_augment is False


class TestMakeConfigs:
    def test_defaults(self):
        vcfg, tcfg = make_configs({})
        assert vcfg == VariantConfig() and tcfg == TrainConfig()

    def test_argument_overrides_file_variant(self):
        vcfg, _ = make_configs({"variant": "C"}, variant="D")
        assert vcfg == variant_preset("D")

    def test_typed_conversions(self):
        vcfg, tcfg = make_configs(
            {
                "k": "16",
                "coarse_loss_weight": "128",
                "cp_activation": "false",
                "backbone_channels": "4, 4, 8, 8, 8, 8",
                "channel_mean": "0.4 0.45 0.5",
                "seed": "9",
                "mirror_augment": "yes",
            }
        )
        assert vcfg.k == 16
        assert vcfg.coarse_loss_weight == 128.0
        assert vcfg.cp_activation is False
        assert vcfg.backbone_channels == (4, 4, 8, 8, 8, 8)
        assert vcfg.channel_mean == (0.4, 0.45, 0.5)
        assert tcfg.seed == 9 and tcfg.mirror_augment is True

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            make_configs({"learning_rate": "1e-5"})

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="bad value"):
            make_configs({"k": "eight"})
        with pytest.raises(ConfigError, match="bad value"):
            make_configs({"mirror_augment": "maybe"})

    def test_overrides_still_validated(self):
        with pytest.raises(ConfigError):
            make_configs({"k": "6"})
        with pytest.raises(ConfigError):
            make_configs({"modalities": "rgb"})  # breaks the fusion invariant

    def test_frozen_configs(self):
        vcfg, tcfg = make_configs({})
        with pytest.raises(dataclasses.FrozenInstanceError):
            vcfg.k = 32
        with pytest.raises(dataclasses.FrozenInstanceError):
            tcfg.lr = 1.0
