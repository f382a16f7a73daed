import numpy as np
import pytest

from dronemosaic import CorruptFile, ImageIOError, UnsupportedFormat, load_image, save_image
from dronemosaic.image import image_size


@pytest.mark.parametrize("suffix", [".png", ".ppm"])
def test_round_trip_is_bit_identical(tmp_path, rng, suffix):
    img = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    path = tmp_path / f"img{suffix}"
    save_image(img, path)
    np.testing.assert_array_equal(load_image(path), img)


def test_pgm_round_trip_gives_equal_channels(tmp_path, rng):
    gray = rng.integers(0, 256, (9, 13), dtype=np.uint8)
    path = tmp_path / "g.pgm"
    save_image(gray, path)
    out = load_image(path)
    assert out.shape == (9, 13, 3)
    for c in range(3):
        np.testing.assert_array_equal(out[:, :, c], gray)


def test_frame_dimensions_reported(tmp_path):
    path = tmp_path / "frame.png"
    save_image(np.zeros((480, 640, 3), np.uint8), path)
    assert image_size(load_image(path)) == (640, 480)


@pytest.mark.parametrize("suffix", [".png", ".ppm"])
def test_truncated_file_is_corrupt(tmp_path, rng, suffix):
    path = tmp_path / f"img{suffix}"
    save_image(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8), path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptFile):
        load_image(path)


def test_ppm_header_with_comment(tmp_path):
    path = tmp_path / "c.ppm"
    path.write_bytes(b"P6\n# made by hand\n2 1\n255\n" + bytes([1, 2, 3, 4, 5, 6]))
    np.testing.assert_array_equal(load_image(path), [[[1, 2, 3], [4, 5, 6]]])


def test_sixteen_bit_pnm_unsupported(tmp_path):
    path = tmp_path / "deep.ppm"
    path.write_bytes(b"P6 1 1 65535\n" + bytes(6))
    with pytest.raises(UnsupportedFormat):
        load_image(path)


def test_ascii_pnm_and_unknown_formats_unsupported(tmp_path):
    ascii_ppm = tmp_path / "a.ppm"
    ascii_ppm.write_bytes(b"P3\n1 1\n255\n1 2 3\n")
    other = tmp_path / "x.bin"
    other.write_bytes(b"GIF89a....")
    for path in (ascii_ppm, other):
        with pytest.raises(UnsupportedFormat):
            load_image(path)


def test_missing_file(tmp_path):
    with pytest.raises(ImageIOError):
        load_image(tmp_path / "absent.png")


def test_unknown_suffix_on_save(tmp_path):
    with pytest.raises(UnsupportedFormat):
        save_image(np.zeros((2, 2, 3), np.uint8), tmp_path / "x.tiff")
