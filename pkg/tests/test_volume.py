import numpy as np
import pytest

from conftest import grid_of, label_volume
from oar_evalkit.errors import GeometryError, LabelFormatError, OrientationError
from oar_evalkit.volume import Grid, LabelVolume, resample_labels_nearest

from oracles import brute_nearest_label


class TestGrid:
    def test_validates_dims_and_spacing(self):
        with pytest.raises(GeometryError):
            Grid((0, 4, 4), (1, 1, 1))
        with pytest.raises(GeometryError):
            Grid((4, 4, 4), (1, -1, 1))
        with pytest.raises(GeometryError):
            Grid((4, 4, 4), (1, float("inf"), 1))

    def test_rejects_incoherent_axis_codes(self):
        with pytest.raises(OrientationError):
            Grid((4, 4, 4), (1, 1, 1), axis_codes=("R", "L", "S"))

    def test_axial_axis_follows_si_code(self):
        assert grid_of((4, 4, 4)).axial_axis() == 2
        g = Grid((4, 4, 4), (1, 1, 1), axis_codes=("S", "A", "R"))
        assert g.axial_axis() == 0

    def test_voxel_volume(self):
        assert grid_of((2, 2, 2), (0.5, 1.0, 2.0)).voxel_volume_mm3 == 1.0


class TestLabelVolume:
    def test_voxels_become_read_only(self):
        vol = label_volume(np.zeros((3, 3, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            vol.voxels[0, 0, 0] = 1

    def test_shape_mismatch(self):
        with pytest.raises(GeometryError):
            LabelVolume(grid_of((3, 3, 3)), np.zeros((3, 3, 2), dtype=np.uint8))

    def test_rejects_floats_and_negatives(self):
        with pytest.raises(LabelFormatError):
            label_volume(np.zeros((2, 2, 2), dtype=np.float32))
        with pytest.raises(LabelFormatError):
            label_volume(np.full((2, 2, 2), -1, dtype=np.int16))

    def test_codes_present(self):
        v = np.zeros((3, 3, 3), dtype=np.uint8)
        v[0, 0, 0] = 5
        v[1, 1, 1] = 2
        assert label_volume(v).codes_present() == [2, 5]


class TestResample:
    def test_identity_on_same_grid(self):
        v = np.arange(27, dtype=np.int32).reshape(3, 3, 3) % 4
        vol = label_volume(v, spacing=(1, 2, 3))
        out = resample_labels_nearest(vol, vol.grid)
        assert np.array_equal(out.voxels, v)

    def test_axis_code_mismatch(self):
        vol = label_volume(np.zeros((3, 3, 3), dtype=np.uint8))
        ref = Grid((3, 3, 3), (1, 1, 1), axis_codes=("L", "P", "I"))
        with pytest.raises(OrientationError):
            resample_labels_nearest(vol, ref)

    def test_upsample_single_voxel_to_block(self):
        v = np.zeros((2, 2, 2), dtype=np.uint8)
        v[1, 1, 1] = 7
        vol = label_volume(v, spacing=(2, 2, 2), origin=(0, 0, 0))
        # halved spacing, doubled dims, origin shifted so voxel centers nest
        ref = Grid((4, 4, 4), (1, 1, 1), origin=(-0.5, -0.5, -0.5))
        out = resample_labels_nearest(vol, ref)
        assert int((out.voxels == 7).sum()) == 8
        assert bool(np.all(out.voxels[2:, 2:, 2:] == 7))

    def test_idempotent_onto_same_ref_grid(self, rng):
        v = rng.integers(0, 5, (6, 5, 4)).astype(np.int16)
        vol = label_volume(v, spacing=(1.3, 0.7, 2.1), origin=(4.0, -1.0, 0.5))
        ref = Grid((8, 8, 8), (0.9, 0.8, 1.1), (3.0, -2.0, 1.0))
        once = resample_labels_nearest(vol, ref)
        twice = resample_labels_nearest(once, ref)
        assert np.array_equal(once.voxels, twice.voxels)

    def test_matches_bruteforce_nearest_center(self, rng):
        for _ in range(5):
            src = rng.integers(0, 6, (8, 8, 8)).astype(np.int32)
            sp_s = rng.uniform(0.5, 2.0, 3)
            or_s = rng.uniform(-3, 3, 3)
            sp_r = rng.uniform(0.5, 2.0, 3)
            or_r = rng.uniform(-3, 3, 3)
            vol = label_volume(src, spacing=tuple(sp_s), origin=tuple(or_s))
            ref = Grid((11, 11, 11), tuple(sp_r), tuple(or_r))
            out = resample_labels_nearest(vol, ref)
            src_centers = [or_s[a] + np.arange(8) * sp_s[a] for a in range(3)]
            ref_centers = [or_r[a] + np.arange(11) * sp_r[a] for a in range(3)]
            expected = brute_nearest_label(src, src_centers, ref_centers)
            assert np.array_equal(out.voxels, expected)

    def test_halfway_tie_prefers_lower_index(self):
        # src centers at 0 and 1; ref center at exactly 0.5 on each axis
        v = np.zeros((2, 2, 2), dtype=np.uint8)
        v[0, 0, 0] = 3
        v[1, 1, 1] = 9
        vol = label_volume(v, spacing=(1, 1, 1))
        ref = Grid((1, 1, 1), (1, 1, 1), origin=(0.5, 0.5, 0.5))
        out = resample_labels_nearest(vol, ref)
        assert out.voxels[0, 0, 0] == 3
