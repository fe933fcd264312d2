import numpy as np
import pytest
from PIL import Image

import rgbdsod as R
from rgbdsod.dataset import load_input_pair
from rgbdsod.errors import ConfigError, ContractViolation, DataError


def _write_triplet(root, sample_id="s0", size=40, gt_values=(0, 255)):
    for name in ("rgb", "depth", "gt"):
        (root / name).mkdir(exist_ok=True)
    rng = np.random.default_rng(0)
    rgb = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
    Image.fromarray(rgb, "RGB").save(root / "rgb" / f"{sample_id}.png")
    depth = rng.integers(0, 60000, (size, size)).astype(np.uint16)
    Image.fromarray(depth).save(root / "depth" / f"{sample_id}.png")
    gt = rng.choice(np.array(gt_values, dtype=np.uint8), (size, size))
    Image.fromarray(gt, "L").save(root / "gt" / f"{sample_id}.png")
    return (
        root / "rgb" / f"{sample_id}.png",
        root / "depth" / f"{sample_id}.png",
        root / "gt" / f"{sample_id}.png",
    )


class TestLoadSample:
    def test_resizes_all_maps(self, tmp_path):
        paths = _write_triplet(tmp_path)
        sample = R.load_sample(*paths, target_size=64)
        assert sample.rgb.shape == (3, 64, 64)
        assert sample.depth.shape == (64, 64)
        assert sample.gt.shape == (64, 64)

    def test_gt_binarized(self, tmp_path):
        """Anti-aliased masks collapse to {0,1}: 37 < 127.5 goes to 0."""
        paths = _write_triplet(tmp_path, gt_values=(0, 37, 255))
        sample = R.load_sample(*paths, target_size=32)
        assert set(np.unique(sample.gt)) <= {0.0, 1.0}

    def test_sixteen_bit_depth_loads(self, tmp_path):
        paths = _write_triplet(tmp_path, size=32)
        sample = R.load_sample(*paths, target_size=32)
        assert sample.depth.max() > 255  # 16-bit range survived

    def test_missing_file_names_path(self, tmp_path):
        paths = _write_triplet(tmp_path)
        with pytest.raises(DataError, match="nosuch"):
            R.load_sample(tmp_path / "nosuch.png", paths[1], paths[2], 64)

    def test_undecodable_image(self, tmp_path):
        paths = _write_triplet(tmp_path)
        bad = tmp_path / "bad.png"
        bad.write_bytes(b"not an image at all")
        with pytest.raises(DataError, match="bad.png"):
            R.load_sample(bad, paths[1], paths[2], 64)

    @pytest.mark.parametrize("size", [0, 16, 31, 33, 100])
    def test_bad_target_size(self, tmp_path, size):
        paths = _write_triplet(tmp_path)
        with pytest.raises(ConfigError):
            R.load_sample(*paths, target_size=size)

    def test_rgb_depth_as_depth_rejected(self, tmp_path):
        paths = _write_triplet(tmp_path)
        with pytest.raises(DataError, match="single-channel"):
            R.load_sample(paths[0], paths[0], paths[2], 64)


class TestDepthToThreeChannel:
    def test_identity_range(self):
        d = np.array([[0.0, 255.0], [100.0, 50.0]], dtype=np.float32)
        out = R.depth_to_three_channel(d)
        assert out.shape == (3, 2, 2)
        np.testing.assert_array_equal(out[0], d)

    def test_channels_equal_and_in_range(self):
        rng = np.random.default_rng(1)
        d = rng.uniform(3.0, 9000.0, (7, 5)).astype(np.float32)
        out = R.depth_to_three_channel(d)
        np.testing.assert_array_equal(out[0], out[1])
        np.testing.assert_array_equal(out[0], out[2])
        assert out.min() >= 0.0 and out.max() <= 255.0

    def test_hand_derived_scaling(self):
        out = R.depth_to_three_channel(np.array([[2.0, 6.0, 10.0]]))
        np.testing.assert_allclose(out[0], [[0.0, 127.5, 255.0]])

    def test_constant_map_goes_to_zeros(self):
        out = R.depth_to_three_channel(np.full((4, 4), 7.0))
        assert (out == 0).all()

    def test_nonfinite_rejected(self):
        d = np.ones((3, 3), dtype=np.float32)
        d[1, 1] = np.nan
        with pytest.raises(ContractViolation):
            R.depth_to_three_channel(d)

    def test_negative_rejected(self):
        with pytest.raises(ContractViolation):
            R.depth_to_three_channel(np.array([[-1.0, 2.0]]))


class TestMirrorAugment:
    def _sample(self):
        rng = np.random.default_rng(2)
        return R.RgbdSample(
            rgb=rng.uniform(0, 255, (3, 6, 8)).astype(np.float32),
            depth=rng.uniform(0, 100, (6, 8)).astype(np.float32),
            gt=(rng.random((6, 8)) > 0.5).astype(np.float32),
            id="x",
        )

    def test_involution_bit_exact(self):
        s = self._sample()
        twice = R.mirror_augment(R.mirror_augment(s))
        np.testing.assert_array_equal(twice.rgb, s.rgb)
        np.testing.assert_array_equal(twice.depth, s.depth)
        np.testing.assert_array_equal(twice.gt, s.gt)

    def test_single_pixel_moves_to_flipped_column(self):
        s = self._sample()
        s.gt[:] = 0
        s.gt[2, 1] = 1
        flipped = R.mirror_augment(s)
        assert flipped.gt[2, 8 - 1 - 1] == 1
        assert flipped.gt.sum() == 1

    def test_symmetric_sample_unchanged(self):
        s = self._sample()
        s.rgb = s.rgb + s.rgb[:, :, ::-1]
        s.depth = s.depth + s.depth[:, ::-1]
        s.gt[:] = 1
        flipped = R.mirror_augment(s)
        np.testing.assert_array_equal(flipped.rgb, s.rgb)
        np.testing.assert_array_equal(flipped.depth, s.depth)


class TestSiamesePair:
    def test_shapes_and_roundtrip(self):
        rng = np.random.default_rng(3)
        rgb = rng.standard_normal((3, 64, 64)).astype(np.float32)
        depth = rng.standard_normal((3, 64, 64)).astype(np.float32)
        pair = R.form_siamese_pair(rgb, depth)
        assert pair.shape == (2, 3, 64, 64)
        np.testing.assert_array_equal(pair[0], rgb)
        np.testing.assert_array_equal(pair[1], depth)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ContractViolation):
            R.form_siamese_pair(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))

    def test_channel_count_enforced(self):
        with pytest.raises(ContractViolation):
            R.form_siamese_pair(np.zeros((1, 4, 4)), np.zeros((1, 4, 4)))

    def test_prepare_pair_normalization(self):
        sample = R.RgbdSample(
            rgb=np.full((3, 4, 4), 255.0, dtype=np.float32),
            depth=np.zeros((4, 4), dtype=np.float32),
            gt=np.zeros((4, 4), dtype=np.float32),
        )
        pair = R.prepare_pair(sample, R.Preprocess(channel_mean=(0.5, 0.5, 0.5)))
        np.testing.assert_allclose(pair[0], 0.5)  # 255/255 - 0.5
        np.testing.assert_allclose(pair[1], -0.5)  # constant depth -> zeros - 0.5


class TestSaliencyDataset:
    def test_scan_and_manifest(self, tmp_path):
        for sid in ("b", "a", "c"):
            _write_triplet(tmp_path, sample_id=sid)
        ds = R.SaliencyDataset(tmp_path, target_size=32)
        assert ds.ids == ["a", "b", "c"]  # lexicographic without manifest
        (tmp_path / "manifest.txt").write_text("c\na\n")
        ds = R.SaliencyDataset(tmp_path, target_size=32)
        assert ds.ids == ["c", "a"]
        sample = ds[0]
        assert sample.id == "c"
        assert sample.gt.shape == (32, 32)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DataError, match="rgb"):
            R.SaliencyDataset(tmp_path, target_size=32)

    def test_empty_dataset(self, tmp_path):
        for name in ("rgb", "depth", "gt"):
            (tmp_path / name).mkdir()
        with pytest.raises(DataError, match="no samples"):
            R.SaliencyDataset(tmp_path, target_size=32)


def test_load_input_pair_reports_original_size(tmp_path):
    paths = _write_triplet(tmp_path, size=48)
    sample, orig_hw = load_input_pair(paths[0], paths[1], 32)
    assert orig_hw == (48, 48)
    assert sample.rgb.shape == (3, 32, 32)
    assert (sample.gt == 0).all()
