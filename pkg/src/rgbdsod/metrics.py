"""Saliency evaluation: structure measure, max F, max E over 256 thresholds, MAE.

Conventions, fixed here and mirrored verbatim by the brute-force oracles in
the test suite:

* thresholds are t/255 for integer t in [0, 255]; a pixel is foreground when
  s >= t/255 (so t = 0 marks everything foreground),
* F uses beta^2 = 0.3; a threshold with zero true positives scores 0,
* E centers both maps by their means, alignment = 2*gc*fc / (gc^2 + fc^2),
  enhancement = (align+1)^2 / 4, averaged over all pixels; degenerate masks
  fall back to mean-based scores,
* S uses alpha = 0.5; sample standard deviations (N-1 denominator, zero when
  a region has fewer than two pixels); the region split rounds the foreground
  centroid half-up and puts the centroid row/column into the top-left block;
  an empty block carries zero area weight and is skipped.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DataError

BETA_SQUARED = 0.3
ALPHA = 0.5
NUM_THRESHOLDS = 256


def _validate(s, g):
    s = np.asarray(s, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if s.shape != g.shape:
        raise ContractViolation(f"shape mismatch: {s.shape} vs {g.shape}")
    if s.ndim != 2 or s.size == 0:
        raise ContractViolation(f"maps must be nonempty 2-D, got shape {s.shape}")
    if s.min() < 0.0 or s.max() > 1.0:
        raise ContractViolation(
            f"saliency values must lie in [0,1], got [{s.min()}, {s.max()}]"
        )
    if not np.isin(g, (0.0, 1.0)).all():
        raise ContractViolation("ground truth must be binary {0,1}")
    return s, g


def mae(s, g) -> float:
    s, g = _validate(s, g)
    return float(np.abs(s - g).mean())


def f_measure_curve(s, g) -> np.ndarray:
    s, g = _validate(s, g)
    fg = g > 0.5
    n_fg = int(fg.sum())
    if n_fg == 0:
        raise DataError("all-background ground truth: F-measure undefined")
    curve = np.zeros(NUM_THRESHOLDS, dtype=np.float64)
    for t in range(NUM_THRESHOLDS):
        pred = s >= t / 255.0
        tp = int(np.logical_and(pred, fg).sum())
        if tp == 0:
            continue
        precision = tp / int(pred.sum())
        recall = tp / n_fg
        curve[t] = (
            (1.0 + BETA_SQUARED)
            * precision
            * recall
            / (BETA_SQUARED * precision + recall)
        )
    return curve


def max_f_measure(s, g):
    curve = f_measure_curve(s, g)
    return float(curve.max()), curve


def e_measure_curve(s, g) -> np.ndarray:
    s, g = _validate(s, g)
    n_fg = g.sum()
    curve = np.zeros(NUM_THRESHOLDS, dtype=np.float64)
    for t in range(NUM_THRESHOLDS):
        fm = (s >= t / 255.0).astype(np.float64)
        if n_fg == 0:
            enhanced = 1.0 - fm
        elif n_fg == g.size:
            enhanced = fm
        else:
            gc = g - g.mean()
            fc = fm - fm.mean()
            # gc is never zero for a non-degenerate binary mask, so the
            # denominator is strictly positive at every pixel.
            align = 2.0 * gc * fc / (gc * gc + fc * fc)
            enhanced = (align + 1.0) ** 2 / 4.0
        curve[t] = float(enhanced.mean())
    return curve


def max_e_measure(s, g):
    curve = e_measure_curve(s, g)
    return float(curve.max()), curve


def _object_score(values) -> float:
    m = float(values.mean())
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * m / (m * m + 1.0 + sd)


def _ssim_block(x, y) -> float:
    n = x.size
    mx, my = float(x.mean()), float(y.mean())
    if n > 1:
        vx = float(x.var(ddof=1))
        vy = float(y.var(ddof=1))
        cxy = float(((x - mx) * (y - my)).sum() / (n - 1))
    else:
        vx = vy = cxy = 0.0
    alpha = 4.0 * mx * my * cxy
    beta = (mx * mx + my * my) * (vx + vy)
    if alpha != 0.0:
        return alpha / beta
    if beta == 0.0:
        return 1.0
    return 0.0


def s_measure(s, g) -> float:
    s, g = _validate(s, g)
    mu = float(g.mean())
    if mu == 0.0:
        return max(0.0, 1.0 - float(s.mean()))
    if mu == 1.0:
        return max(0.0, float(s.mean()))

    fg = g > 0.5
    s_object = mu * _object_score(s[fg]) + (1.0 - mu) * _object_score(
        (1.0 - s)[~fg]
    )

    rows, cols = np.nonzero(fg)
    cy = int(np.floor(rows.mean() + 0.5))
    cx = int(np.floor(cols.mean() + 0.5))
    n = g.size
    s_region = 0.0
    for rsel in (slice(0, cy + 1), slice(cy + 1, None)):
        for csel in (slice(0, cx + 1), slice(cx + 1, None)):
            gb = g[rsel, csel]
            if gb.size == 0:
                continue
            s_region += (gb.size / n) * _ssim_block(s[rsel, csel], gb)

    return max(0.0, ALPHA * s_object + (1.0 - ALPHA) * s_region)


@dataclass
class MetricsReport:
    s_alpha: float
    f_beta_max: float
    e_phi_max: float
    mae: float
    f_curve: np.ndarray = field(repr=False, default=None)
    e_curve: np.ndarray = field(repr=False, default=None)
    n_samples: int = 1
    n_excluded_f: int = 0

    def as_dict(self) -> dict:
        return {
            "s_alpha": self.s_alpha,
            "f_beta_max": self.f_beta_max,
            "e_phi_max": self.e_phi_max,
            "mae": self.mae,
            "n_samples": self.n_samples,
            "n_excluded_f": self.n_excluded_f,
        }


def evaluate_sample(s, g) -> MetricsReport:
    """All four measures for one prediction/mask pair."""
    f_max, f_curve = max_f_measure(s, g)
    e_max, e_curve = max_e_measure(s, g)
    return MetricsReport(
        s_alpha=s_measure(s, g),
        f_beta_max=f_max,
        e_phi_max=e_max,
        mae=mae(s, g),
        f_curve=f_curve,
        e_curve=e_curve,
    )


def evaluate_pairs(pairs, ids=None):
    """Dataset-level report plus per-sample rows.

    The dataset F and E maxima are taken over the threshold-wise mean of the
    per-sample curves (curves are averaged first, then maximized). Samples
    whose mask has no foreground are excluded from the F aggregate with a
    warning; E, S, and MAE still count them via their degenerate fallbacks.
    """
    rows = []
    f_curves, e_curves, s_vals, mae_vals = [], [], [], []
    excluded = 0
    for i, (s, g) in enumerate(pairs):
        sid = ids[i] if ids is not None else str(i)
        row = {"id": sid}
        row["mae"] = mae(s, g)
        row["s_alpha"] = s_measure(s, g)
        e_max, e_curve = max_e_measure(s, g)
        row["e_phi_max"] = e_max
        e_curves.append(e_curve)
        if np.asarray(g).sum() == 0:
            warnings.warn(
                f"sample {sid}: all-background ground truth, excluded from F-measure"
            )
            row["f_beta_max"] = float("nan")
            excluded += 1
        else:
            f_max, f_curve = max_f_measure(s, g)
            row["f_beta_max"] = f_max
            f_curves.append(f_curve)
        s_vals.append(row["s_alpha"])
        mae_vals.append(row["mae"])
        rows.append(row)

    if not rows:
        raise DataError("no prediction/mask pairs to evaluate")
    if not f_curves:
        raise DataError("every ground truth is all-background; F-measure undefined")

    f_curve = np.mean(f_curves, axis=0)
    e_curve = np.mean(e_curves, axis=0)
    report = MetricsReport(
        s_alpha=float(np.mean(s_vals)),
        f_beta_max=float(f_curve.max()),
        e_phi_max=float(e_curve.max()),
        mae=float(np.mean(mae_vals)),
        f_curve=f_curve,
        e_curve=e_curve,
        n_samples=len(rows),
        n_excluded_f=excluded,
    )
    return report, rows


def normalize_saliency(arr, enable: bool = True) -> np.ndarray:
    """Map a loaded prediction to [0,1].

    With ``enable`` the map is min-max rescaled (constant maps go to zero),
    which makes differently-scaled outputs comparable; otherwise values are
    taken as 8-bit intensities and divided by 255.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if enable:
        lo, hi = float(arr.min()), float(arr.max())
        if hi > lo:
            return (arr - lo) / (hi - lo)
        return np.zeros_like(arr)
    return np.clip(arr / 255.0, 0.0, 1.0)
