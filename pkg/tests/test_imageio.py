import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from curricomp.imageio import (ImageFormatError, decode_ppm, encode_ppm, from_uint8, quantize,
                               read_image, resize_bilinear, to_uint8, write_ppm)


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9), st.just(3))))
def test_ppm_round_trip(pixels):
    assert np.array_equal(decode_ppm(encode_ppm(pixels)), pixels)


def test_header_comments():
    raw = b"P6\n# made by hand\n2 1\n255\n" + bytes([1, 2, 3, 4, 5, 6])
    assert decode_ppm(raw).tolist() == [[[1, 2, 3], [4, 5, 6]]]


@pytest.mark.parametrize("raw", [b"P3\n1 1\n255\n000", b"P6\n1 1\n65535\n" + b"\0" * 6,
                                 b"P6\n2 2\n255\n\0\0\0", b"P6\n2"])
def test_bad_ppm(raw):
    with pytest.raises(ImageFormatError):
        decode_ppm(raw)


def test_quantize_round_trip_exact(rng):
    img = quantize(rng.random((5, 6, 3)))
    assert np.array_equal(from_uint8(to_uint8(img)), img)
    assert np.array_equal(quantize(img), img)


def test_file_round_trip(tmp_path, rng):
    img = quantize(rng.random((4, 3, 3)))
    write_ppm(tmp_path / "a.ppm", img)
    assert np.array_equal(read_image(tmp_path / "a.ppm"), img)


def test_unknown_extension(tmp_path):
    (tmp_path / "a.gif").write_bytes(b"GIF89a")
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "a.gif")


def test_resize_identity_and_constant(rng):
    img = rng.random((6, 6, 3))
    assert np.array_equal(resize_bilinear(img, 6, 6), img)
    const = np.full((7, 5, 3), 0.3)
    np.testing.assert_allclose(resize_bilinear(const, 13, 3), 0.3, atol=1e-15)


def test_resize_upsample_interpolates():
    img = np.zeros((1, 2, 3))
    img[0, 1] = 1.0
    out = resize_bilinear(img, 1, 4)
    # pixel-centre alignment: output centres at 0.25, 0.75, 1.25, 1.75 in input units (minus 0.5)
    np.testing.assert_allclose(out[0, :, 0], [0.0, 0.25, 0.75, 1.0])


def test_resize_downsample_by_two_averages():
    img = np.arange(16.0).reshape(4, 4, 1)
    out = resize_bilinear(img, 2, 2)
    np.testing.assert_allclose(out[..., 0], [[2.5, 4.5], [10.5, 12.5]])
