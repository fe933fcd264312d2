"""RGB-D sample loading, preprocessing, augmentation, and Siamese pair assembly.

On-disk layout: three sibling directories ``rgb/``, ``depth/``, ``gt/`` with
identical basenames, plus an optional ``manifest.txt`` listing sample ids one
per line. Without a manifest the rgb/ directory is scanned and ids are taken
in lexicographic order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, ContractViolation, DataError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

# Accepted single-channel depth decodings: 8-bit gray, 16-bit gray, 32-bit int/float.
_DEPTH_MODES = ("L", "I", "I;16", "I;16B", "F")


@dataclass
class RgbdSample:
    """One RGB image with its depth map and binary ground-truth mask.

    rgb:   (3, H, W) float32 in [0, 255]
    depth: (H, W) float32, nonnegative, arbitrary range
    gt:    (H, W) float32 with values in {0, 1}
    """

    rgb: np.ndarray
    depth: np.ndarray
    gt: np.ndarray
    id: str = ""


def _open_image(path) -> Image.Image:
    if not os.path.isfile(path):
        raise DataError(f"missing file: {path}")
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    return img


def load_sample(rgb_path, depth_path, gt_path, target_size: int) -> RgbdSample:
    """Load one sample, resizing all three maps to target_size x target_size.

    The ground truth is rescaled to [0, 1] and binarized at 0.5, so
    anti-aliased mask edges collapse back to hard labels.
    """
    if target_size < 32 or target_size % 32 != 0:
        raise ConfigError(
            f"target_size must be >= 32 and divisible by 32, got {target_size}"
        )
    size = (target_size, target_size)

    rgb_img = _open_image(rgb_path).convert("RGB").resize(size, Image.BILINEAR)
    rgb = np.asarray(rgb_img, dtype=np.float32).transpose(2, 0, 1)

    depth_img = _open_image(depth_path)
    if depth_img.mode not in _DEPTH_MODES:
        raise DataError(
            f"depth must be a single-channel image, got mode "
            f"{depth_img.mode!r}: {depth_path}"
        )
    depth = np.asarray(depth_img, dtype=np.float32)
    depth = np.asarray(
        Image.fromarray(depth, mode="F").resize(size, Image.BILINEAR),
        dtype=np.float32,
    )

    gt_img = _open_image(gt_path).convert("L").resize(size, Image.BILINEAR)
    gt = np.asarray(gt_img, dtype=np.float32) / 255.0
    gt = (gt >= 0.5).astype(np.float32)

    sample_id = os.path.splitext(os.path.basename(str(rgb_path)))[0]
    return RgbdSample(rgb=rgb, depth=depth, gt=gt, id=sample_id)


def load_input_pair(rgb_path, depth_path, target_size: int):
    """Load rgb+depth only (no mask), e.g. for inference.

    Returns (sample with an all-zero gt, original (H, W) of the RGB image).
    """
    if not os.path.isfile(rgb_path):
        raise DataError(f"missing file: {rgb_path}")
    with Image.open(rgb_path) as probe:
        orig_hw = (probe.height, probe.width)
    sample = load_sample(rgb_path, depth_path, rgb_path, target_size)
    sample.gt = np.zeros((target_size, target_size), dtype=np.float32)
    return sample, orig_hw


def depth_to_three_channel(depth: np.ndarray) -> np.ndarray:
    """Min-max normalize a depth map to [0, 255] and replicate it into 3 channels.

    A constant map has no contrast to recover and maps to all zeros rather
    than raising, so a degenerate sample cannot abort a training run.
    """
    depth = np.asarray(depth, dtype=np.float32)
    if depth.ndim != 2:
        raise ContractViolation(f"depth must be 2-D, got shape {depth.shape}")
    if not np.all(np.isfinite(depth)):
        raise ContractViolation("depth contains non-finite values")
    if (depth < 0).any():
        raise ContractViolation("depth contains negative values")
    lo = float(depth.min())
    hi = float(depth.max())
    if hi > lo:
        scaled = (depth - lo) * (255.0 / (hi - lo))
    else:
        scaled = np.zeros_like(depth)
    return np.repeat(scaled[None], 3, axis=0)


def mirror_augment(sample: RgbdSample) -> RgbdSample:
    """Horizontally flip rgb, depth, and gt consistently. Involutive."""
    return RgbdSample(
        rgb=sample.rgb[:, :, ::-1].copy(),
        depth=sample.depth[:, ::-1].copy(),
        gt=sample.gt[:, ::-1].copy(),
        id=sample.id,
    )


@dataclass(frozen=True)
class Preprocess:
    """Value normalization applied to both modalities before the network.

    Maps [0, 255] inputs to [0, 1] and subtracts a per-channel mean.
    """

    channel_mean: tuple = (0.5, 0.5, 0.5)

    def apply(self, x3: np.ndarray) -> np.ndarray:
        if x3.ndim != 3 or x3.shape[0] != 3:
            raise ContractViolation(f"expected (3, H, W), got {x3.shape}")
        mean = np.asarray(self.channel_mean, dtype=np.float32).reshape(3, 1, 1)
        return x3.astype(np.float32) / 255.0 - mean


def form_siamese_pair(rgb3: np.ndarray, depth3: np.ndarray) -> np.ndarray:
    """Stack preprocessed RGB and 3-channel depth along a new leading axis.

    The modality order is fixed for the whole pipeline: index 0 is RGB,
    index 1 is depth. No channel-dimension concatenation happens here or
    anywhere downstream.
    """
    rgb3 = np.asarray(rgb3)
    depth3 = np.asarray(depth3)
    if rgb3.shape != depth3.shape:
        raise ContractViolation(
            f"rgb/depth shape mismatch: {rgb3.shape} vs {depth3.shape}"
        )
    if rgb3.ndim != 3 or rgb3.shape[0] != 3:
        raise ContractViolation(f"expected (3, H, W) slices, got {rgb3.shape}")
    return np.stack([rgb3, depth3], axis=0)


def prepare_pair(sample: RgbdSample, preprocess: Preprocess = Preprocess()) -> np.ndarray:
    """Full per-sample input path: three-channel depth, normalize, stack."""
    rgb = preprocess.apply(sample.rgb)
    depth = preprocess.apply(depth_to_three_channel(sample.depth))
    return form_siamese_pair(rgb, depth)


def _find_with_extension(directory, sample_id):
    for ext in IMAGE_EXTENSIONS:
        candidate = os.path.join(directory, sample_id + ext)
        if os.path.isfile(candidate):
            return candidate
    raise DataError(f"no image for id {sample_id!r} under {directory}")


class SaliencyDataset:
    """Directory-backed RGB-D dataset with lazy per-sample loading."""

    def __init__(self, root, target_size: int, manifest_name: str = "manifest.txt"):
        self.root = str(root)
        self.target_size = int(target_size)
        self.rgb_dir = os.path.join(self.root, "rgb")
        self.depth_dir = os.path.join(self.root, "depth")
        self.gt_dir = os.path.join(self.root, "gt")
        for d in (self.rgb_dir, self.depth_dir, self.gt_dir):
            if not os.path.isdir(d):
                raise DataError(f"missing dataset directory: {d}")

        manifest = os.path.join(self.root, manifest_name)
        if os.path.isfile(manifest):
            with open(manifest, encoding="utf-8") as fh:
                self.ids = [line.strip() for line in fh if line.strip()]
        else:
            self.ids = sorted(
                os.path.splitext(name)[0]
                for name in os.listdir(self.rgb_dir)
                if name.lower().endswith(IMAGE_EXTENSIONS)
            )
        if not self.ids:
            raise DataError(f"dataset at {self.root} contains no samples")

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, index: int) -> RgbdSample:
        sample_id = self.ids[index]
        sample = load_sample(
            _find_with_extension(self.rgb_dir, sample_id),
            _find_with_extension(self.depth_dir, sample_id),
            _find_with_extension(self.gt_dir, sample_id),
            self.target_size,
        )
        sample.id = sample_id
        return sample
