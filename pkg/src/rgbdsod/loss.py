"""Pixel-summed cross-entropy and the weighted composite training objective.

Sum (not mean) reduction is load-bearing: the default coarse weight of 256
(= 16 squared) exactly cancels the 16x16 pixel-count gap between the final
map and the coarse maps, so a uniform per-pixel error contributes equally
to the final term and to each weighted coarse term. All log-sums run in
float64 regardless of input dtype; at full-map pixel counts a float32
accumulator loses more precision than the loss tolerances allow.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import ContractViolation

CLAMP_EPS = 1e-7


def cross_entropy(s, g):
    """-sum(g*log(s) + (1-g)*log(1-s)), natural log, summed over every pixel.

    s holds probabilities, clamped into [eps, 1-eps] before the logs.
    """
    if s.shape != g.shape:
        raise ContractViolation(
            f"prediction/target shape mismatch: {tuple(s.shape)} vs {tuple(g.shape)}"
        )
    s64 = s.double().clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
    g64 = g.double()
    return -(g64 * torch.log(s64) + (1.0 - g64) * torch.log1p(-s64)).sum()


def downsample_gt(g, hw):
    """Area-average the mask to the coarse grid, then re-binarize at 0.5."""
    if g.ndim == 2:
        g4 = g[None, None]
    elif g.ndim == 3:
        g4 = g[:, None]
    elif g.ndim == 4:
        g4 = g
    else:
        raise ContractViolation(f"mask must be 2-4 dimensional, got {g.ndim}")
    if tuple(g4.shape[-2:]) == tuple(hw):
        small = g4
    else:
        small = F.interpolate(g4.float(), size=tuple(hw), mode="area")
    small = (small >= 0.5).to(g.dtype)
    return small.reshape(*g.shape[:-2], *small.shape[-2:])


@dataclass
class LossReport:
    l_f: torch.Tensor
    l_g_rgb: torch.Tensor
    l_g_d: torch.Tensor
    l_total: torch.Tensor
    lam: float


def total_loss(s_f, s_c_rgb, s_c_d, g, lam: float = 256.0) -> LossReport:
    """Final-map loss plus lam-weighted coarse losses against downsampled masks.

    Coarse maps must sit on the 1/16 grid of the final map. A missing coarse
    map (single-modality variants) contributes an exact zero.
    """
    l_f = cross_entropy(s_f, g)
    h, w = int(s_f.shape[-2]), int(s_f.shape[-1])
    if h % 16 != 0 or w % 16 != 0:
        raise ContractViolation(f"final map size {h}x{w} is not divisible by 16")
    coarse_hw = (h // 16, w // 16)

    zero = torch.zeros((), dtype=torch.float64, device=l_f.device)
    g_small = None
    terms = []
    for s_c in (s_c_rgb, s_c_d):
        if s_c is None:
            terms.append(zero)
            continue
        if tuple(s_c.shape[-2:]) != coarse_hw:
            raise ContractViolation(
                f"coarse map must be {coarse_hw}, got {tuple(s_c.shape[-2:])}"
            )
        if g_small is None:
            g_small = downsample_gt(g, coarse_hw)
        if g_small.numel() != s_c.numel():
            raise ContractViolation(
                f"coarse map {tuple(s_c.shape)} does not match downsampled "
                f"mask {tuple(g_small.shape)}"
            )
        terms.append(cross_entropy(s_c, g_small.reshape(s_c.shape)))
    l_g_rgb, l_g_d = terms
    l_total = l_f + lam * (l_g_rgb + l_g_d)
    return LossReport(l_f=l_f, l_g_rgb=l_g_rgb, l_g_d=l_g_d, l_total=l_total, lam=lam)
