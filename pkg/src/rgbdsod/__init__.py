"""Scale-configurable RGB-D salient object detection.

A Siamese shared-backbone encoder consumes RGB and three-channeled depth as
slices of one batch, per-level compression feeds a parameter-free cross-modal
merge, and a densely connected decoder with multi-branch aggregation blocks
produces the full-resolution map, deeply supervised by two coarse side
outputs. Ships with the four standard saliency metrics, a synthetic
mini-dataset generator, and an ablation harness.
"""

__version__ = "0.1.0"

from .config import TrainConfig, VariantConfig, variant_preset
from .dataset import (
    Preprocess,
    RgbdSample,
    SaliencyDataset,
    depth_to_three_channel,
    form_siamese_pair,
    load_sample,
    mirror_augment,
    prepare_pair,
)
from .dcf_decoder import DenseDecoder, FaBlock, cm_fuse, concat_fuse
from .encoder import BackboneConfig, ToyBackbone, encode, register_backbone
from .errors import (
    ConfigError,
    ContractViolation,
    DataError,
    NumericalError,
    RgbdSodError,
)
from .jl_head import CoarseHead, CompressionPyramid, coarse_predict
from .loss import LossReport, cross_entropy, total_loss
from .metrics import (
    MetricsReport,
    evaluate_pairs,
    mae,
    max_e_measure,
    max_f_measure,
    s_measure,
)
from .network import SaliencyNet, build_variant, parameter_count
from .synth import generate_dataset, generate_scene
from .trainer import TrainResult, evaluate_model, infer, load_model, train

__all__ = [
    "__version__",
    "BackboneConfig",
    "CoarseHead",
    "CompressionPyramid",
    "ConfigError",
    "ContractViolation",
    "DataError",
    "DenseDecoder",
    "FaBlock",
    "LossReport",
    "MetricsReport",
    "NumericalError",
    "Preprocess",
    "RgbdSample",
    "RgbdSodError",
    "SaliencyDataset",
    "SaliencyNet",
    "ToyBackbone",
    "TrainConfig",
    "TrainResult",
    "VariantConfig",
    "build_variant",
    "cm_fuse",
    "coarse_predict",
    "concat_fuse",
    "cross_entropy",
    "depth_to_three_channel",
    "encode",
    "evaluate_model",
    "evaluate_pairs",
    "form_siamese_pair",
    "generate_dataset",
    "generate_scene",
    "infer",
    "load_model",
    "load_sample",
    "mae",
    "max_e_measure",
    "max_f_measure",
    "mirror_augment",
    "parameter_count",
    "prepare_pair",
    "register_backbone",
    "s_measure",
    "total_loss",
    "train",
    "variant_preset",
]
