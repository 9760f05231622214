"""Binary PPM reading and writing."""

import numpy as np
import pytest

from refinery.errors import FormatError, InputError
from refinery.imageio import read_ppm, write_ppm


def rng_for(tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([20240605, tag])))


class TestRoundTrip:
    def test_quantized_grid_survives_exactly(self, tmp_path):
        levels = rng_for(1).integers(0, 256, (9, 7, 3)).astype(np.float32)
        img = levels / 255.0
        path = str(tmp_path / "img.ppm")
        write_ppm(path, img)
        back = read_ppm(path)
        assert np.array_equal(back, (levels / 255.0).astype(np.float32))

    def test_arbitrary_floats_within_half_step(self, tmp_path):
        img = rng_for(2).uniform(0, 1, (12, 8, 3))
        path = str(tmp_path / "img.ppm")
        write_ppm(path, img)
        back = read_ppm(path)
        assert np.abs(back - img).max() <= 0.5 / 255.0 + 1e-7

    def test_rounding_is_half_up(self, tmp_path):
        # 0.5*255 = 127.5 must land on 128, not 127
        img = np.full((1, 1, 3), 0.5, dtype=np.float32)
        path = str(tmp_path / "img.ppm")
        write_ppm(path, img)
        raw = (tmp_path / "img.ppm").read_bytes()
        assert raw.endswith(bytes([128, 128, 128]))

    def test_out_of_range_values_clipped(self, tmp_path):
        img = np.array([[[-0.5, 0.0, 2.0]]], dtype=np.float32)
        path = str(tmp_path / "img.ppm")
        write_ppm(path, img)
        assert np.array_equal(read_ppm(path)[0, 0], np.array([0.0, 0.0, 1.0], dtype=np.float32))

    def test_header_layout(self, tmp_path):
        path = str(tmp_path / "img.ppm")
        write_ppm(path, np.zeros((2, 3, 3), dtype=np.float32))
        raw = (tmp_path / "img.ppm").read_bytes()
        assert raw.startswith(b"P6\n3 2\n255\n")
        assert len(raw) == len(b"P6\n3 2\n255\n") + 2 * 3 * 3

    def test_no_temp_file_left_behind(self, tmp_path):
        write_ppm(str(tmp_path / "img.ppm"), np.zeros((2, 2, 3), dtype=np.float32))
        assert sorted(p.name for p in tmp_path.iterdir()) == ["img.ppm"]


class TestReadFlexibility:
    def test_comments_and_extra_whitespace(self, tmp_path):
        raster = bytes(range(2 * 2 * 3))
        blob = b"P6 # comment after magic\n# a full comment line\n  2\t2 # size\n255\n" + raster
        path = tmp_path / "c.ppm"
        path.write_bytes(blob)
        img = read_ppm(str(path))
        assert img.shape == (2, 2, 3)
        assert np.array_equal(np.floor(img * 255.0 + 0.5).astype(np.uint8).ravel(),
                              np.frombuffer(raster, dtype=np.uint8))


class TestReadErrors:
    def write(self, tmp_path, blob: bytes) -> str:
        path = tmp_path / "bad.ppm"
        path.write_bytes(blob)
        return str(path)

    def test_wrong_magic(self, tmp_path):
        with pytest.raises(FormatError, match="P6"):
            read_ppm(self.write(tmp_path, b"P5\n2 2\n255\n" + b"\x00" * 4))

    def test_unsupported_maxval(self, tmp_path):
        with pytest.raises(FormatError, match="maxval 65535"):
            read_ppm(self.write(tmp_path, b"P6\n2 2\n65535\n" + b"\x00" * 24))

    def test_non_numeric_header(self, tmp_path):
        with pytest.raises(FormatError, match="non-numeric"):
            read_ppm(self.write(tmp_path, b"P6\nab 2\n255\n" + b"\x00" * 12))

    def test_truncated_raster_reports_counts(self, tmp_path):
        with pytest.raises(FormatError, match="expected 12"):
            read_ppm(self.write(tmp_path, b"P6\n2 2\n255\n" + b"\x00" * 5))

    def test_zero_size_rejected(self, tmp_path):
        with pytest.raises(FormatError, match="degenerate"):
            read_ppm(self.write(tmp_path, b"P6\n0 2\n255\n"))


class TestWriteValidation:
    def test_wrong_shape_rejected(self, tmp_path):
        with pytest.raises(InputError, match="H, W, 3"):
            write_ppm(str(tmp_path / "x.ppm"), np.zeros((4, 4), dtype=np.float32))

    def test_non_finite_rejected(self, tmp_path):
        img = np.zeros((2, 2, 3), dtype=np.float32)
        img[0, 0, 0] = np.nan
        with pytest.raises(InputError, match="non-finite"):
            write_ppm(str(tmp_path / "x.ppm"), img)
