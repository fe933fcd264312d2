"""Architecture and training configuration, presets, and the flat config-file parser."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .errors import ConfigError

FUSION_MODES = ("cm", "concat", "identity")
MODALITY_MODES = ("rgb+d", "rgb", "d")
LEARNING_MODES = ("joint", "separate")


@dataclass(frozen=True)
class VariantConfig:
    """Architecture selection for one model variant.

    fusion: how per-level RGB and depth features merge. "cm" is the
        parameter-free add-plus-multiply merge, "concat" stacks channels
        (downstream aggregation blocks then accept 2k inputs), "identity"
        passes the lone modality through untouched.
    modalities: which input streams the network consumes.
    learning: "joint" shares one backbone across both streams, "separate"
        instantiates an unshared second backbone for depth.
    coarse_loss_weight: weight on the low-resolution auxiliary loss terms.
    """

    backbone: str = "toy"
    fusion: str = "cm"
    modalities: str = "rgb+d"
    learning: str = "joint"
    k: int = 64
    input_size: int = 64
    coarse_loss_weight: float = 256.0
    backbone_channels: tuple = (16, 32, 64, 64, 64, 64)
    dilation: int = 2
    cp_activation: bool = True
    fa_post_activation: bool = True
    channel_mean: tuple = (0.5, 0.5, 0.5)


def validate_variant(cfg: VariantConfig) -> VariantConfig:
    """Check every structural invariant; raise ConfigError naming the violation."""
    if cfg.fusion not in FUSION_MODES:
        raise ConfigError(f"fusion must be one of {FUSION_MODES}, got {cfg.fusion!r}")
    if cfg.modalities not in MODALITY_MODES:
        raise ConfigError(
            f"modalities must be one of {MODALITY_MODES}, got {cfg.modalities!r}"
        )
    if cfg.learning not in LEARNING_MODES:
        raise ConfigError(
            f"learning must be one of {LEARNING_MODES}, got {cfg.learning!r}"
        )
    # Identity fusion and single-modality input imply each other: there is
    # nothing to fuse with one stream, and two streams must be merged somehow.
    if (cfg.fusion == "identity") != (cfg.modalities != "rgb+d"):
        raise ConfigError(
            "violated invariant: fusion == 'identity' iff modalities != 'rgb+d' "
            f"(got fusion={cfg.fusion!r}, modalities={cfg.modalities!r})"
        )
    if cfg.learning == "separate" and cfg.modalities != "rgb+d":
        raise ConfigError(
            "violated invariant: learning == 'separate' requires modalities == "
            f"'rgb+d' (got modalities={cfg.modalities!r})"
        )
    if cfg.k <= 0:
        raise ConfigError(f"k must be positive, got {cfg.k}")
    if cfg.k % 4 != 0:
        raise ConfigError(
            f"k must be divisible by 4 (four equal-width aggregation branches), "
            f"got {cfg.k}"
        )
    if cfg.input_size < 32 or cfg.input_size % 32 != 0:
        raise ConfigError(
            f"input_size must be >= 32 and divisible by 32, got {cfg.input_size}"
        )
    if not (math.isfinite(cfg.coarse_loss_weight) and cfg.coarse_loss_weight >= 0):
        raise ConfigError(
            f"coarse_loss_weight must be finite and >= 0, got {cfg.coarse_loss_weight}"
        )
    ch = tuple(cfg.backbone_channels)
    if len(ch) != 6 or any(int(c) <= 0 for c in ch):
        raise ConfigError(f"backbone_channels must be 6 positive integers, got {ch}")
    if any(ch[i] > ch[i + 1] for i in range(4)):
        raise ConfigError(
            f"backbone_channels must be non-decreasing over levels 1..5, got {ch}"
        )
    if cfg.dilation < 1:
        raise ConfigError(f"dilation must be >= 1, got {cfg.dilation}")
    if len(tuple(cfg.channel_mean)) != 3:
        raise ConfigError(f"channel_mean needs 3 values, got {cfg.channel_mean}")
    return cfg


@dataclass(frozen=True)
class TrainConfig:
    # Desk-scale default lr, chosen empirically (see README): larger rates
    # are unstable under sum-reduction losses with momentum 0.99.
    lr: float = 1e-6
    momentum: float = 0.99
    weight_decay: float = 5e-4
    epochs: int = 60
    batch_size: int = 1
    mirror_augment: bool = True
    seed: int = 0


def validate_train(cfg: TrainConfig) -> TrainConfig:
    if not (math.isfinite(cfg.lr) and cfg.lr > 0):
        raise ConfigError(f"lr must be finite and > 0, got {cfg.lr}")
    if not (0.0 <= cfg.momentum < 1.0):
        raise ConfigError(f"momentum must be in [0, 1), got {cfg.momentum}")
    if cfg.weight_decay < 0:
        raise ConfigError(f"weight_decay must be >= 0, got {cfg.weight_decay}")
    if cfg.epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {cfg.epochs}")
    if cfg.batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {cfg.batch_size}")
    return cfg


# The ablation matrix: full model, concat fusion, single-modality streams,
# and unshared (separate) backbones. Letter keys are how the comparison
# table labels its rows; the aliases are self-describing equivalents.
VARIANT_PRESETS = {
    "A": VariantConfig(),
    "C": VariantConfig(fusion="concat"),
    "D": VariantConfig(fusion="identity", modalities="rgb"),
    "E": VariantConfig(fusion="identity", modalities="d"),
    "F": VariantConfig(learning="separate"),
}

VARIANT_ALIASES = {
    "joint-cm-rgbd": "A",
    "joint-concat-rgbd": "C",
    "rgb-only": "D",
    "depth-only": "E",
    "separate-cm-rgbd": "F",
}


def variant_preset(name: str) -> VariantConfig:
    key = VARIANT_ALIASES.get(name.strip().lower(), name.strip().upper())
    if key not in VARIANT_PRESETS:
        known = sorted(VARIANT_PRESETS) + sorted(VARIANT_ALIASES)
        raise ConfigError(f"unknown variant {name!r}; known: {', '.join(known)}")
    return VARIANT_PRESETS[key]


def variant_to_dict(cfg: VariantConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["backbone_channels"] = list(cfg.backbone_channels)
    d["channel_mean"] = list(cfg.channel_mean)
    return d


def variant_from_dict(d: dict) -> VariantConfig:
    known = {f.name for f in dataclasses.fields(VariantConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown variant config keys: {sorted(unknown)}")
    kw = dict(d)
    for key in ("backbone_channels", "channel_mean"):
        if key in kw:
            kw[key] = tuple(kw[key])
    return validate_variant(VariantConfig(**kw))


def _convert(key, raw, target_type):
    raw = raw.strip()
    try:
        if target_type is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is tuple:
            parts = [p for p in raw.replace(",", " ").split() if p]
            return tuple(float(p) if "." in p else int(p) for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for config key {key!r}: {exc}") from exc


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno} is not 'key = value': {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def make_configs(raw: dict, variant: str = None):
    """Build (VariantConfig, TrainConfig) from flat string key/values.

    ``variant`` (or a ``variant`` key in the dict) selects a preset first;
    remaining keys override individual fields. Unknown keys are an error,
    not a warning, so typos cannot silently change an experiment.
    """
    raw = dict(raw)
    preset_name = raw.pop("variant", None)
    if variant is not None:
        preset_name = variant
    vcfg = variant_preset(preset_name) if preset_name else VariantConfig()
    tcfg = TrainConfig()

    vfields = {f.name: f for f in dataclasses.fields(VariantConfig)}
    tfields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    v_over, t_over = {}, {}
    for key, value in raw.items():
        if key in vfields:
            ftype = vfields[key].type
            v_over[key] = _convert(key, str(value), _runtime_type(ftype))
        elif key in tfields:
            ftype = tfields[key].type
            t_over[key] = _convert(key, str(value), _runtime_type(ftype))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if v_over:
        vcfg = dataclasses.replace(vcfg, **v_over)
    if t_over:
        tcfg = dataclasses.replace(tcfg, **t_over)
    return validate_variant(vcfg), validate_train(tcfg)


def _runtime_type(annotation):
    # Dataclass fields carry string annotations under `from __future__ import
    # annotations`; map the handful we use back to runtime types.
    name = annotation if isinstance(annotation, str) else annotation.__name__
    return {"bool": bool, "int": int, "float": float, "tuple": tuple, "str": str}[name]
