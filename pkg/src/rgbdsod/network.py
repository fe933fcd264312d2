"""Full saliency network assembled from a VariantConfig."""

from __future__ import annotations

import torch
from torch import nn

from .config import VariantConfig, validate_variant
from .dcf_decoder import DenseDecoder, cm_fuse, concat_fuse
from .encoder import BackboneConfig, build_backbone, he_normal_init_
from .errors import ContractViolation
from .jl_head import CoarseHead, CompressionPyramid


class SaliencyNet(nn.Module):
    """Stacked-batch two-stream saliency model.

    Input is always a modality-major stack (2B, 3, S, S): the first B rows
    are RGB, the last B are three-channeled depth. Single-modality variants
    slice their stream out before any computation, so the unused half can
    never influence the output. All outputs are logits; callers squash.
    """

    def __init__(self, config: VariantConfig, init_seed: int = 0):
        super().__init__()
        self.config = validate_variant(config)
        bb_cfg = BackboneConfig(
            channels_per_level=tuple(config.backbone_channels),
            dilation=config.dilation,
        )
        self.backbone = build_backbone(config.backbone, bb_cfg)
        if config.learning == "separate":
            # Unshared second parameter set for the depth stream; same topology.
            self.backbone_depth = build_backbone(config.backbone, bb_cfg)
        else:
            self.backbone_depth = None
        self.compress = CompressionPyramid(
            self.backbone.out_channels, config.k, activation=config.cp_activation
        )
        self.coarse_head = CoarseHead(config.k)
        fused_width = 2 * config.k if config.fusion == "concat" else config.k
        self.decoder = DenseDecoder(
            config.k, fused_width, post_activation=config.fa_post_activation
        )
        he_normal_init_(self, init_seed)

    def _check_input(self, stacked):
        if stacked.ndim != 4 or stacked.shape[1] != 3:
            raise ContractViolation(
                f"expected stacked (2B, 3, S, S) input, got {tuple(stacked.shape)}"
            )
        if stacked.shape[0] % 2 != 0 or stacked.shape[0] == 0:
            raise ContractViolation(
                f"stacked batch must be even and nonempty, got {stacked.shape[0]}"
            )
        s = self.config.input_size
        if tuple(stacked.shape[-2:]) != (s, s):
            raise ContractViolation(
                f"this model was built for {s}x{s} inputs, got "
                f"{stacked.shape[-2]}x{stacked.shape[-1]}"
            )

    def forward(self, stacked):
        self._check_input(stacked)
        half = stacked.shape[0] // 2
        cfg = self.config

        if cfg.modalities == "rgb+d":
            if cfg.learning == "joint":
                levels = self.backbone(stacked)
            else:
                rgb_levels = self.backbone(stacked[:half])
                d_levels = self.backbone_depth(stacked[half:])
                levels = [torch.cat([r, d], dim=0) for r, d in zip(rgb_levels, d_levels)]
            cp = self.compress(levels)
            coarse = self.coarse_head(cp[5])
            coarse_rgb, coarse_d = coarse[:half], coarse[half:]
            if cfg.fusion == "cm":
                fused = [cm_fuse(x[:half], x[half:]) for x in cp]
            else:
                fused = [concat_fuse(x[:half], x[half:]) for x in cp]
        else:
            # Single stream: take one half of the stack, leave the other unread.
            x = stacked[:half] if cfg.modalities == "rgb" else stacked[half:]
            cp = self.compress(self.backbone(x))
            coarse = self.coarse_head(cp[5])
            coarse_rgb = coarse if cfg.modalities == "rgb" else None
            coarse_d = coarse if cfg.modalities == "d" else None
            fused = cp  # identity fusion

        final = self.decoder(fused)
        return {"final": final, "coarse_rgb": coarse_rgb, "coarse_d": coarse_d}


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def build_variant(config: VariantConfig, init_seed: int = 0) -> SaliencyNet:
    return SaliencyNet(config, init_seed=init_seed)
