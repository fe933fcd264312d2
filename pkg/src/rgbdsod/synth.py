"""Synthetic RGB-D scene generator with built-in single-modality ambiguity.

Every scene contains three disjoint elliptical objects on a textured ground:

* the target: painted in the object color family AND raised in depth; this
  is the only object in the ground truth,
* an RGB decoy: painted from the same color family but left flat in depth,
* a depth decoy: raised like the target but never painted, so the RGB image
  carries no trace of it.

Color and elevation for target and decoys are drawn iid from the same
distributions, so neither modality alone can identify the target; only the
conjunction of "colored" and "raised" does. Models that fuse both inputs can
separate target from decoys on held-out scenes, single-input models cannot.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import DataError

DEPTH_SCALE = 65535  # depth maps are written as 16-bit PNGs

_MAX_PLACEMENT_TRIES = 1000


def _ellipse_mask(size, cy, cx, ry, rx):
    yy, xx = np.ogrid[:size, :size]
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def _draw_geometry(rng, size):
    """Sample three pairwise-disjoint ellipses (target, rgb decoy, depth decoy)."""
    r_lo = max(2.0, 0.10 * size)
    r_hi = max(r_lo + 1.0, 0.18 * size)
    gap = max(2.0, 0.03 * size)
    for _ in range(_MAX_PLACEMENT_TRIES):
        masks = []
        padded = []
        for _ in range(3):
            ry = rng.uniform(r_lo, r_hi)
            rx = rng.uniform(r_lo, r_hi)
            cy = rng.uniform(ry + gap, size - 1 - ry - gap)
            cx = rng.uniform(rx + gap, size - 1 - rx - gap)
            masks.append(_ellipse_mask(size, cy, cx, ry, rx))
            padded.append(_ellipse_mask(size, cy, cx, ry + gap, rx + gap))
        disjoint = not (
            (padded[0] & masks[1]).any()
            or (padded[0] & masks[2]).any()
            or (padded[1] & masks[2]).any()
        )
        if disjoint and all(m.any() for m in masks):
            return masks
    raise DataError("could not place three disjoint objects; size too small?")


def _object_color(rng):
    # Warm family, well separated from the cool background band below.
    return np.array(
        [rng.uniform(150, 255), rng.uniform(30, 120), rng.uniform(20, 90)],
        dtype=np.float32,
    )


def generate_scene(rng, size: int) -> dict:
    """Build one scene. Returns float working arrays plus the component masks.

    The returned dict also carries ``base_rgb`` and ``base_depth``, the
    object-free ground layers: the composite equals the base exactly wherever
    an object did not touch that modality, which is what makes the decoys
    provably invisible to the other input.
    """
    target, rgb_decoy, depth_decoy = _draw_geometry(rng, size)

    bg_color = np.array(
        [rng.uniform(60, 100), rng.uniform(70, 110), rng.uniform(90, 130)],
        dtype=np.float32,
    )
    base_rgb = bg_color[None, None, :] + rng.normal(0.0, 4.0, (size, size, 3))
    base_rgb = np.clip(base_rgb, 0.0, 255.0).astype(np.float32)

    plane = rng.uniform(0.25, 0.40)
    tilt = rng.uniform(-0.05, 0.05)
    ramp = np.linspace(-0.5, 0.5, size, dtype=np.float32)
    base_depth = plane + tilt * ramp[:, None] + rng.normal(0.0, 0.008, (size, size))
    base_depth = np.clip(base_depth, 0.0, 1.0).astype(np.float32)

    rgb = base_rgb.copy()
    rgb[target] = _object_color(rng) + rng.normal(0.0, 4.0, (int(target.sum()), 3))
    rgb[rgb_decoy] = _object_color(rng) + rng.normal(
        0.0, 4.0, (int(rgb_decoy.sum()), 3)
    )
    rgb = np.clip(rgb, 0.0, 255.0).astype(np.float32)

    depth = base_depth.copy()
    depth[target] += rng.uniform(0.30, 0.45)
    depth[depth_decoy] += rng.uniform(0.30, 0.45)
    depth = np.clip(depth, 0.0, 1.0).astype(np.float32)

    return {
        "rgb": rgb,
        "depth": depth,
        "gt": target.astype(np.float32),
        "base_rgb": base_rgb,
        "base_depth": base_depth,
        "target_mask": target,
        "rgb_decoy_mask": rgb_decoy,
        "depth_decoy_mask": depth_decoy,
    }


def save_scene(scene: dict, rgb_dir, depth_dir, gt_dir, sample_id: str) -> None:
    rgb8 = np.clip(np.rint(scene["rgb"]), 0, 255).astype(np.uint8)
    Image.fromarray(rgb8, mode="RGB").save(os.path.join(rgb_dir, sample_id + ".png"))

    d16 = np.clip(np.rint(scene["depth"] * DEPTH_SCALE), 0, DEPTH_SCALE)
    Image.fromarray(d16.astype(np.uint16)).save(
        os.path.join(depth_dir, sample_id + ".png")
    )

    gt8 = (scene["gt"] >= 0.5).astype(np.uint8) * 255
    Image.fromarray(gt8, mode="L").save(os.path.join(gt_dir, sample_id + ".png"))


def _write_split(root, split, count, size, rng):
    split_root = os.path.join(root, split)
    dirs = {name: os.path.join(split_root, name) for name in ("rgb", "depth", "gt")}
    for d in dirs.values():
        os.makedirs(d, exist_ok=True)
    ids = []
    for i in range(count):
        sample_id = f"{split}_{i:04d}"
        save_scene(
            generate_scene(rng, size), dirs["rgb"], dirs["depth"], dirs["gt"], sample_id
        )
        ids.append(sample_id)
    with open(os.path.join(split_root, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(ids) + "\n")
    return split_root


def generate_dataset(
    root, num_train: int, num_val: int, size: int = 64, seed: int = 0
) -> dict:
    """Write a train/val dataset under root. Same seed, same bytes on disk."""
    if num_train < 1 or num_val < 0:
        raise DataError(
            f"need at least one training sample, got train={num_train} val={num_val}"
        )
    rng = np.random.default_rng(seed)
    out = {"root": str(root), "train": num_train, "val": num_val, "size": size}
    _write_split(root, "train", num_train, size, rng)
    if num_val:
        _write_split(root, "val", num_val, size, rng)
    return out
