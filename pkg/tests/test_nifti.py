import gzip
import struct

import numpy as np
import pytest

from conftest import grid_of, label_volume
from oar_evalkit.errors import FormatError, LabelFormatError, UnsupportedRankError
from oar_evalkit.nifti import (HEADER_SIZE, read_grid, read_image_volume,
                               read_label_volume, read_nifti, write_nifti)
from oar_evalkit.volume import Grid, ImageVolume, LabelVolume

DTYPES = (np.uint8, np.int16, np.uint16, np.int32, np.float32, np.float64)


def _roundtrip(vol, path):
    write_nifti(vol, path)
    return read_nifti(path)


class TestRoundTrip:
    def test_zero_volume(self, tmp_path):
        vol = label_volume(np.zeros((4, 4, 4), dtype=np.uint8))
        back = _roundtrip(vol, tmp_path / "zero.nii")
        assert isinstance(back, LabelVolume)
        assert back.voxels.sum() == 0 and back.dims == (4, 4, 4)

    def test_gzip_transparency(self, tmp_path):
        vol = label_volume(np.zeros((4, 4, 4), dtype=np.uint8))
        write_nifti(vol, tmp_path / "v.nii")
        write_nifti(vol, tmp_path / "v.nii.gz")
        a = read_nifti(tmp_path / "v.nii")
        b = read_nifti(tmp_path / "v.nii.gz")
        assert np.array_equal(a.voxels, b.voxels)
        assert a.grid.same_lattice(b.grid)

    @pytest.mark.parametrize("dtype", DTYPES)
    @pytest.mark.parametrize("compress", [False, True])
    def test_all_datatypes_bit_exact(self, tmp_path, rng, dtype, compress):
        if np.issubdtype(np.dtype(dtype), np.integer):
            arr = rng.integers(0, np.iinfo(dtype).max // 2 + 1,
                               size=(16, 16, 16)).astype(dtype)
            vol = label_volume(arr)
        else:
            arr = rng.normal(0, 100, size=(16, 16, 16)).astype(dtype)
            vol = ImageVolume(grid_of((16, 16, 16)), arr)
        ext = "nii.gz" if compress else "nii"
        back = _roundtrip(vol, tmp_path / f"v.{ext}")
        assert back.voxels.dtype == np.dtype(dtype)
        assert np.array_equal(back.voxels, arr)

    def test_spacing_preserved(self, tmp_path):
        vol = label_volume(np.zeros((3, 3, 3), np.uint8), spacing=(0.5, 0.5, 2.0))
        back = _roundtrip(vol, tmp_path / "sp.nii")
        assert np.allclose(back.spacing, (0.5, 0.5, 2.0), rtol=1e-6)

    def test_origin_and_axes_preserved(self, tmp_path):
        g = Grid((3, 4, 5), (1.0, 1.5, 2.0), (-12.5, 3.25, 40.0), ("L", "A", "I"))
        vol = LabelVolume(g, np.zeros((3, 4, 5), np.uint8))
        back = _roundtrip(vol, tmp_path / "o.nii")
        assert back.axis_codes == ("L", "A", "I")
        assert np.allclose(back.origin, g.origin, rtol=1e-6, atol=1e-5)


class TestHeaderParsing:
    def test_study_scale_header(self, tmp_path):
        # header-only file at clinical CT scale: 512x512x183 at
        # 1.0 x 1.0 x 2.0 mm
        vol = label_volume(np.zeros((1, 1, 1), np.uint8))
        write_nifti(vol, tmp_path / "t.nii")
        raw = bytearray((tmp_path / "t.nii").read_bytes()[:HEADER_SIZE + 4])
        struct.pack_into("<8h", raw, 40, 3, 512, 512, 183, 1, 1, 1, 1)
        struct.pack_into("<8f", raw, 76, 1.0, 1.0, 1.0, 2.0, 0, 0, 0, 0)
        (tmp_path / "big.nii").write_bytes(bytes(raw))
        grid = read_grid(tmp_path / "big.nii")
        assert grid.dims == (512, 512, 183)
        assert grid.spacing == (1.0, 1.0, 2.0)

    def test_scl_scaling_applied_to_images(self, tmp_path):
        arr = np.arange(8, dtype=np.int16).reshape(2, 2, 2)
        vol = ImageVolume(grid_of((2, 2, 2)), arr)
        write_nifti(vol, tmp_path / "s.nii")
        raw = bytearray((tmp_path / "s.nii").read_bytes())
        struct.pack_into("<ff", raw, 112, 2.0, -1.0)  # scl_slope, scl_inter
        (tmp_path / "s.nii").write_bytes(bytes(raw))
        img = read_image_volume(tmp_path / "s.nii")
        assert np.allclose(img.voxels, arr * 2.0 - 1.0)

    def test_trailing_singleton_dims_accepted(self, tmp_path):
        vol = label_volume(np.ones((3, 3, 3), np.uint8))
        write_nifti(vol, tmp_path / "d4.nii")
        raw = bytearray((tmp_path / "d4.nii").read_bytes())
        struct.pack_into("<8h", raw, 40, 4, 3, 3, 3, 1, 1, 1, 1)
        (tmp_path / "d4.nii").write_bytes(bytes(raw))
        back = read_nifti(tmp_path / "d4.nii")
        assert back.dims == (3, 3, 3)

    def test_non_singleton_4d_rejected(self, tmp_path):
        vol = label_volume(np.ones((3, 3, 3), np.uint8))
        write_nifti(vol, tmp_path / "d4.nii")
        raw = bytearray((tmp_path / "d4.nii").read_bytes())
        struct.pack_into("<8h", raw, 40, 4, 3, 3, 3, 2, 1, 1, 1)
        (tmp_path / "d4.nii").write_bytes(bytes(raw))
        with pytest.raises(UnsupportedRankError):
            read_nifti(tmp_path / "d4.nii")


class TestErrors:
    def test_bad_magic(self, tmp_path):
        vol = label_volume(np.zeros((2, 2, 2), np.uint8))
        write_nifti(vol, tmp_path / "m.nii")
        raw = bytearray((tmp_path / "m.nii").read_bytes())
        raw[344:348] = b"xxx\x00"
        (tmp_path / "m.nii").write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_nifti(tmp_path / "m.nii")

    def test_truncated_header(self, tmp_path):
        (tmp_path / "t.nii").write_bytes(b"\x00" * 100)
        with pytest.raises(FormatError):
            read_nifti(tmp_path / "t.nii")

    def test_truncated_data(self, tmp_path):
        vol = label_volume(np.zeros((4, 4, 4), np.uint8))
        write_nifti(vol, tmp_path / "t.nii")
        raw = (tmp_path / "t.nii").read_bytes()
        (tmp_path / "t.nii").write_bytes(raw[:-10])
        with pytest.raises(FormatError):
            read_nifti(tmp_path / "t.nii")

    def test_not_nifti(self, tmp_path):
        (tmp_path / "x.nii").write_bytes(b"\x01" * 400)
        with pytest.raises(FormatError):
            read_nifti(tmp_path / "x.nii")

    def test_float_labels_must_be_integral(self, tmp_path):
        arr = np.full((2, 2, 2), 1.5, dtype=np.float32)
        write_nifti(ImageVolume(grid_of((2, 2, 2)), arr), tmp_path / "f.nii")
        with pytest.raises(LabelFormatError):
            read_label_volume(tmp_path / "f.nii")

    def test_integral_float_labels_accepted(self, tmp_path):
        arr = np.full((2, 2, 2), 3.0, dtype=np.float64)
        write_nifti(ImageVolume(grid_of((2, 2, 2)), arr), tmp_path / "f.nii")
        lab = read_label_volume(tmp_path / "f.nii")
        assert np.all(lab.voxels == 3)


class TestAutoKind:
    def test_integer_data_reads_as_labels(self, tmp_path):
        vol = label_volume(np.ones((2, 2, 2), np.int16))
        write_nifti(vol, tmp_path / "k.nii")
        assert isinstance(read_nifti(tmp_path / "k.nii"), LabelVolume)

    def test_float_data_reads_as_image(self, tmp_path):
        vol = ImageVolume(grid_of((2, 2, 2)), np.ones((2, 2, 2), np.float32))
        write_nifti(vol, tmp_path / "k.nii")
        assert isinstance(read_nifti(tmp_path / "k.nii"), ImageVolume)

    def test_gzip_detected_by_content_not_name(self, tmp_path):
        vol = label_volume(np.ones((2, 2, 2), np.uint8))
        write_nifti(vol, tmp_path / "a.nii")
        payload = (tmp_path / "a.nii").read_bytes()
        (tmp_path / "misnamed.nii").write_bytes(gzip.compress(payload))
        back = read_nifti(tmp_path / "misnamed.nii")
        assert np.array_equal(back.voxels, vol.voxels)
