"""Per-level channel compression and the shared coarse prediction head.

Everything here operates on stacked modality batches: outputs keep the
batch layout of their inputs, so RGB and depth stay side by side until
fusion strips the pairing.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import ConfigError, ContractViolation


class CompressionPyramid(nn.Module):
    """Six per-level 3x3 convolutions squeezing side outputs to k channels.

    One parameter set per level (not shared across levels), each applied to
    the whole stacked batch so both modalities are compressed identically.
    """

    def __init__(self, in_channels, k: int, activation: bool = True):
        super().__init__()
        if k <= 0:
            raise ConfigError(f"compression width k must be positive, got {k}")
        in_channels = tuple(in_channels)
        if len(in_channels) != 6:
            raise ConfigError(f"expected 6 channel counts, got {in_channels}")
        self.k = k
        self.activation = activation
        self.convs = nn.ModuleList(
            nn.Conv2d(c, k, 3, padding=1) for c in in_channels
        )

    def forward(self, levels):
        if len(levels) != 6:
            raise ContractViolation(f"expected 6 pyramid levels, got {len(levels)}")
        out = []
        for conv, x in zip(self.convs, levels):
            y = conv(x)
            out.append(torch.relu(y) if self.activation else y)
        return out


class CoarseHead(nn.Module):
    """Shared 1x1, single-output convolution over the coarsest compressed level.

    Exactly k weights and one bias; both modality slices go through the same
    parameters in one call, which is what makes swapping the slices swap the
    two coarse maps bit for bit.
    """

    def __init__(self, k: int):
        super().__init__()
        self.conv = nn.Conv2d(k, 1, 1)

    def forward(self, cp6):
        if cp6.ndim != 4 or cp6.shape[1] != self.conv.in_channels:
            raise ContractViolation(
                f"expected (N, {self.conv.in_channels}, H, H), got {tuple(cp6.shape)}"
            )
        return self.conv(cp6)


def coarse_predict(head: CoarseHead, cp6):
    """Split the head's output into (rgb logits, depth logits).

    cp6 must be a stacked 2-slice batch (or 2B with the RGB block first).
    """
    if cp6.ndim != 4 or cp6.shape[0] % 2 != 0 or cp6.shape[0] == 0:
        raise ContractViolation(
            f"expected an even-batch stacked tensor, got {tuple(cp6.shape)}"
        )
    logits = head(cp6)
    half = logits.shape[0] // 2
    return logits[:half], logits[half:]
