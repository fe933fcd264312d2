"""Cross-modal fusion, multi-branch aggregation, and the dense top-down decoder."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, ContractViolation


def cm_fuse(x_rgb, x_d):
    """Parameter-free merge: sum plus elementwise product.

    Commutative, and zero is its identity, so a silent all-zero modality
    degrades to a pass-through instead of corrupting the other stream.
    """
    if x_rgb.shape != x_d.shape:
        raise ContractViolation(
            f"fusion shape mismatch: {tuple(x_rgb.shape)} vs {tuple(x_d.shape)}"
        )
    return x_rgb + x_d + x_rgb * x_d


def concat_fuse(x_rgb, x_d):
    """Channel concatenation, RGB channels first; doubles the fused width."""
    if x_rgb.shape != x_d.shape:
        raise ContractViolation(
            f"fusion shape mismatch: {tuple(x_rgb.shape)} vs {tuple(x_d.shape)}"
        )
    return torch.cat([x_rgb, x_d], dim=-3)


def identity_fuse(x):
    return x


def _upsample_to(x, hw):
    # Half-pixel-center bilinear everywhere, training and inference alike.
    if x.shape[-2:] == hw:
        return x
    return F.interpolate(x, size=hw, mode="bilinear", align_corners=False)


class FaBlock(nn.Module):
    """Four parallel stride-1 branches concatenated back to k channels.

    Branches: 1x1; 1x1 then 3x3; 1x1 then 5x5; 3x3 max-pool then 1x1. Each
    produces k/4 channels. The rectifier after the reduction convolutions is
    fixed; the one after the concatenation is the configurable toggle (the
    branches' final convolutions are linear, so with the toggle off the
    block's output is signed).
    """

    def __init__(self, in_channels: int, k: int, post_activation: bool = True):
        super().__init__()
        if k % 4 != 0 or k <= 0:
            raise ConfigError(f"k must be a positive multiple of 4, got {k}")
        b = k // 4
        self.in_channels = in_channels
        self.k = k
        self.post_activation = post_activation
        self.branch1 = nn.Conv2d(in_channels, b, 1)
        self.branch2_reduce = nn.Conv2d(in_channels, b, 1)
        self.branch2_conv = nn.Conv2d(b, b, 3, padding=1)
        self.branch3_reduce = nn.Conv2d(in_channels, b, 1)
        self.branch3_conv = nn.Conv2d(b, b, 5, padding=2)
        self.branch4_pool = nn.MaxPool2d(3, stride=1, padding=1)
        self.branch4_conv = nn.Conv2d(in_channels, b, 1)

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ContractViolation(
                f"expected (N, {self.in_channels}, H, W), got {tuple(x.shape)}"
            )
        y1 = self.branch1(x)
        y2 = self.branch2_conv(torch.relu(self.branch2_reduce(x)))
        y3 = self.branch3_conv(torch.relu(self.branch3_reduce(x)))
        y4 = self.branch4_conv(self.branch4_pool(x))
        y = torch.cat([y1, y2, y3, y4], dim=1)
        return torch.relu(y) if self.post_activation else y


def fa_forward(block: FaBlock, x):
    return block(x)


class DenseDecoder(nn.Module):
    """Top-down decoding where every block also sees all deeper blocks.

    Level h's aggregation block consumes its own fused feature map plus the
    bilinearly upsampled outputs of every deeper block (h+1 .. 6), stacked in
    that order. With fused width w*k that makes the block-h input
    w*k + (6-h)*k channels; the shallowest block therefore sees 6k in the
    standard (w=1) mode. A final 1x1 convolution on the shallowest output
    yields the full-resolution logit map.
    """

    def __init__(self, k: int, fused_width: int = None, post_activation: bool = True):
        super().__init__()
        fused_width = k if fused_width is None else fused_width
        self.k = k
        self.fused_width = fused_width
        # index 0 -> level 1 (finest) ... index 5 -> level 6 (coarsest)
        self.blocks = nn.ModuleList(
            FaBlock(fused_width + (6 - h) * k, k, post_activation)
            for h in range(1, 7)
        )
        self.head = nn.Conv2d(k, 1, 1)

    def forward(self, fused):
        if len(fused) != 6:
            raise ContractViolation(f"expected 6 fused levels, got {len(fused)}")
        for i, x in enumerate(fused):
            if x.ndim != 4 or x.shape[1] != self.fused_width:
                raise ContractViolation(
                    f"fused level {i + 1} must be (B, {self.fused_width}, H, H), "
                    f"got {tuple(x.shape)}"
                )
        outputs = {6: self.blocks[5](fused[5])}
        for h in range(5, 0, -1):
            own = fused[h - 1]
            deeper = [
                _upsample_to(outputs[d], own.shape[-2:]) for d in range(h + 1, 7)
            ]
            outputs[h] = self.blocks[h - 1](torch.cat([own] + deeper, dim=1))
        return self.head(outputs[1])


def dense_decode(decoder: DenseDecoder, fused):
    return decoder(fused)
