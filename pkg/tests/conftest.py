import numpy as np
import pytest
import torch

import rgbdsod as R


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


# Slim architecture for functional tests where width does not matter.
SMALL = R.VariantConfig(
    k=8, input_size=32, backbone_channels=(4, 4, 8, 8, 8, 8)
)


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    root = str(tmp_path_factory.mktemp("synthdata"))
    R.generate_dataset(root, num_train=4, num_val=2, size=64, seed=7)
    return root


@pytest.fixture(scope="session")
def small_synth_root(tmp_path_factory):
    root = str(tmp_path_factory.mktemp("synthdata32"))
    R.generate_dataset(root, num_train=3, num_val=0, size=32, seed=3)
    return root


def random_maps(rng, size=8):
    """One random (saliency, mask) pair with nonempty fg and bg."""
    if rng.random() < 0.5:
        s = rng.random((size, size))
    else:
        s = rng.integers(0, 256, (size, size)) / 255.0
    while True:
        g = (rng.random((size, size)) < rng.uniform(0.1, 0.9)).astype(np.float64)
        if 0 < g.sum() < g.size:
            return s, g
