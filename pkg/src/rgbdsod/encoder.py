"""Shared hierarchical feature extractor with six side outputs.

Both modalities ride through one parameter set as slices of the same batch,
so weight sharing is structural rather than enforced by tying: there is
exactly one backbone and one forward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigError, ContractViolation

SPATIAL_DENOMINATORS = (1, 2, 4, 8, 16, 16)


@dataclass(frozen=True)
class BackboneConfig:
    channels_per_level: tuple = (16, 32, 64, 64, 64, 64)
    dilation: int = 2  # receptive-field growth at level 6 in place of striding

    def __post_init__(self):
        ch = tuple(self.channels_per_level)
        if len(ch) != 6 or any(c <= 0 for c in ch):
            raise ConfigError(f"need 6 positive channel counts, got {ch}")
        if any(ch[i] > ch[i + 1] for i in range(4)):
            raise ConfigError(f"channels must be non-decreasing over levels 1..5: {ch}")
        if self.dilation < 1:
            raise ConfigError(f"dilation must be >= 1, got {self.dilation}")


class _Stage(nn.Module):
    def __init__(self, c_in, c_out, stride=1, dilation=1):
        super().__init__()
        self.conv1 = nn.Conv2d(
            c_in, c_out, 3, stride=stride, padding=dilation, dilation=dilation
        )
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=dilation, dilation=dilation)

    def forward(self, x):
        x = torch.relu(self.conv1(x))
        return torch.relu(self.conv2(x))


class ToyBackbone(nn.Module):
    """Six stages of [conv3x3, relu] x 2.

    Stages 2..5 downsample by striding their first convolution; stage 6 keeps
    the stride at 1 and dilates instead, so the two coarsest levels share a
    resolution of input/16.
    """

    def __init__(self, config: BackboneConfig = BackboneConfig()):
        super().__init__()
        self.config = config
        ch = tuple(config.channels_per_level)
        ins = (3,) + ch[:5]
        stages = []
        for level in range(6):
            stride = 2 if 1 <= level <= 4 else 1
            dilation = config.dilation if level == 5 else 1
            stages.append(_Stage(ins[level], ch[level], stride=stride, dilation=dilation))
        self.stages = nn.ModuleList(stages)
        self.out_channels = ch

    def forward(self, x):
        levels = []
        for stage in self.stages:
            x = stage(x)
            levels.append(x)
        return levels


# Registry doubles as the extension hook: any callable returning a module
# with .out_channels (6 ints) and forward(x) -> 6 levels honoring the
# (1, 1/2, 1/4, 1/8, 1/16, 1/16) ratio sequence can be dropped in.
BACKBONE_REGISTRY = {}


def register_backbone(name: str, builder) -> None:
    BACKBONE_REGISTRY[name] = builder


def build_backbone(name: str, config: BackboneConfig = None) -> nn.Module:
    if name not in BACKBONE_REGISTRY:
        raise ConfigError(
            f"unknown backbone {name!r}; registered: {sorted(BACKBONE_REGISTRY)}"
        )
    return BACKBONE_REGISTRY[name](config or BackboneConfig())


register_backbone("toy", ToyBackbone)


def encode(pair, backbone: nn.Module):
    """Run one stacked modality batch through the shared backbone.

    Accepts (2, 3, H, W) stacked pairs (or any even-batch stack); the batch
    dimension is preserved level by level, RGB slices first.
    """
    if pair.ndim != 4 or pair.shape[1] != 3:
        raise ContractViolation(f"expected (N, 3, H, W), got {tuple(pair.shape)}")
    h, w = int(pair.shape[2]), int(pair.shape[3])
    if h % 16 != 0 or w % 16 != 0:
        raise ConfigError(f"input spatial size must be divisible by 16, got {h}x{w}")
    return backbone(pair)


def he_normal_init_(module: nn.Module, seed: int) -> None:
    """Zero-mean Gaussian init scaled by fan-in, driven by a private generator.

    Walking `module.modules()` in construction order with one seeded generator
    makes initialization a pure function of (architecture, seed), which the
    training determinism contract relies on.
    """
    gen = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, nn.Conv2d):
                fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                m.weight.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
