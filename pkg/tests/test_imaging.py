import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mssrnet import imaging
from mssrnet.errors import FormatError, ImageIOError
from mssrnet.imaging import ImagePlane


def rgb(data):
    return ImagePlane(np.asarray(data, dtype=np.float64), "RGB")


def test_image_plane_validates_channels():
    with pytest.raises(ValueError):
        ImagePlane(np.zeros((2, 4, 4)), "RGB")
    y = ImagePlane(np.zeros((4, 5)), "Y")
    assert (y.channels, y.height, y.width) == (1, 4, 5)


# --- BMP / PNG -----------------------------------------------------------------------


def handmade_bmp(pixels_rgb):
    """Independent 24-bit BMP writer: bottom-up rows, BGR, rows padded to 4 bytes."""
    h, w, _ = pixels_rgb.shape
    stride = (3 * w + 3) // 4 * 4
    body = b""
    for row in pixels_rgb[::-1]:
        line = b"".join(bytes((int(b), int(g), int(r))) for r, g, b in row)
        body += line + b"\0" * (stride - len(line))
    header = b"BM" + struct.pack("<IHHI", 54 + len(body), 0, 0, 54)
    info = struct.pack("<IiiHHIIiiII", 40, w, h, 1, 24, 0, len(body), 0, 0, 0, 0)
    return header + info + body


def test_load_2x2_bmp_maps_bytes(tmp_path):
    pixels = np.array([[[0, 0, 0], [255, 255, 255]], [[255, 0, 0], [0, 0, 255]]], dtype=np.uint8)
    path = tmp_path / "tiny.bmp"
    path.write_bytes(handmade_bmp(pixels))
    img = imaging.load_image(path)
    assert img.mode == "RGB" and (img.width, img.height) == (2, 2)
    np.testing.assert_array_equal(img.data, pixels.transpose(2, 0, 1) / 255.0)


@settings(max_examples=25, deadline=None)
@given(w=st.integers(1, 9), h=st.integers(1, 7), seed=st.integers(0, 2**31))
def test_bmp_roundtrip_bit_exact(tmp_path_factory, w, h, seed):
    pixels = np.random.default_rng(seed).integers(0, 256, (h, w, 3), dtype=np.uint8)
    raw = handmade_bmp(pixels)
    d = tmp_path_factory.mktemp("bmp")
    src, dst = d / "a.bmp", d / "b.bmp"
    src.write_bytes(raw)
    imaging.save_image(imaging.load_image(src), dst)
    assert dst.read_bytes()[54:] == raw[54:]
    np.testing.assert_array_equal(imaging.load_image(dst).data, imaging.load_image(src).data)


def test_bmp_top_down_rows(tmp_path):
    pixels = np.array([[[10, 20, 30]], [[40, 50, 60]]], dtype=np.uint8)
    raw = bytearray(handmade_bmp(pixels[::-1]))
    struct.pack_into("<i", raw, 22, -2)  # negative height: first stored row is the top
    path = tmp_path / "td.bmp"
    path.write_bytes(bytes(raw))
    np.testing.assert_array_equal(imaging.load_image(path).data, pixels.transpose(2, 0, 1) / 255.0)


def test_bad_magic_is_format_error(tmp_path):
    path = tmp_path / "bad.bmp"
    path.write_bytes(b"XX" + b"\0" * 100)
    with pytest.raises(FormatError):
        imaging.load_image(path)


def test_unsupported_bmp_depth(tmp_path):
    raw = bytearray(handmade_bmp(np.zeros((2, 2, 3), np.uint8)))
    struct.pack_into("<H", raw, 28, 8)
    path = tmp_path / "8bit.bmp"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        imaging.load_image(path)


def test_truncated_bmp_is_io_error(tmp_path):
    raw = handmade_bmp(np.zeros((4, 4, 3), np.uint8))
    path = tmp_path / "cut.bmp"
    path.write_bytes(raw[:-10])
    with pytest.raises(ImageIOError):
        imaging.load_image(path)


def test_png_roundtrip_rgb_and_gray(tmp_path, rng):
    from PIL import Image

    pixels = rng.integers(0, 256, (5, 7, 3), dtype=np.uint8)
    Image.fromarray(pixels, "RGB").save(tmp_path / "c.png")
    img = imaging.load_image(tmp_path / "c.png")
    np.testing.assert_array_equal(img.data, pixels.transpose(2, 0, 1) / 255.0)
    imaging.save_image(img, tmp_path / "c2.png")
    np.testing.assert_array_equal(np.asarray(Image.open(tmp_path / "c2.png")), pixels)

    gray = rng.integers(0, 256, (4, 6), dtype=np.uint8)
    Image.fromarray(gray, "L").save(tmp_path / "g.png")
    img = imaging.load_image(tmp_path / "g.png")
    assert img.mode == "RGB"
    for ch in range(3):
        np.testing.assert_array_equal(img.data[ch], gray / 255.0)


def test_png_16_bit_gray(tmp_path):
    from PIL import Image

    gray = np.array([[0, 65535], [32768, 1000]], dtype=np.uint16)
    Image.fromarray(gray).save(tmp_path / "g16.png")
    img = imaging.load_image(tmp_path / "g16.png")
    np.testing.assert_allclose(img.data[0], gray / 65535.0)


def test_png_alpha_ignored(tmp_path):
    from PIL import Image

    rgba = np.zeros((2, 2, 4), dtype=np.uint8)
    rgba[..., 0] = 200
    rgba[..., 3] = 0
    Image.fromarray(rgba, "RGBA").save(tmp_path / "a.png")
    np.testing.assert_array_equal(imaging.load_image(tmp_path / "a.png").data[0], np.full((2, 2), 200 / 255))


def test_unsupported_png_mode(tmp_path):
    from PIL import Image

    Image.new("1", (3, 3)).save(tmp_path / "bw.png")
    with pytest.raises(FormatError):
        imaging.load_image(tmp_path / "bw.png")


def test_save_quantization_and_clamp(tmp_path):
    img = rgb(np.array([0.5, -0.3, 1.7]).reshape(3, 1, 1))
    path = tmp_path / "q.bmp"
    imaging.save_image(img, path)
    b, g, r = path.read_bytes()[54:57]
    assert (r, g, b) == (128, 0, 255)


def test_save_rejects_unknown_extension(tmp_path):
    with pytest.raises(ValueError):
        imaging.save_image(rgb(np.zeros((3, 2, 2))), tmp_path / "x.jpg")


# --- colour -------------------------------------------------------------------------


def test_studio_swing_white_and_black():
    white = imaging.rgb_to_y(rgb(np.ones((3, 1, 1))))
    black = imaging.rgb_to_y(rgb(np.zeros((3, 1, 1))))
    # 16 + 65.481 + 128.553 + 24.966 = 235
    assert white.data.item() == pytest.approx(235 / 255, abs=1e-12)
    assert black.data.item() == pytest.approx(16 / 255, abs=1e-12)


def test_ycbcr_of_grey_has_neutral_chroma():
    out = imaging.rgb_to_ycbcr(rgb(np.full((3, 1, 1), 0.4)))
    assert out.data[1].item() == pytest.approx(128 / 255, abs=1e-12)
    assert out.data[2].item() == pytest.approx(128 / 255, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_color_roundtrip(seed):
    img = rgb(np.random.default_rng(seed).random((3, 4, 5)))
    back = imaging.ycbcr_to_rgb(imaging.rgb_to_ycbcr(img))
    np.testing.assert_allclose(back.data, img.data, atol=1e-6)


def test_y_matches_first_ycbcr_channel(rng):
    img = rgb(rng.random((3, 6, 6)))
    np.testing.assert_allclose(imaging.rgb_to_y(img).data[0], imaging.rgb_to_ycbcr(img).data[0], atol=1e-15)


# --- resampling ---------------------------------------------------------------------


def test_keys_kernel_values():
    d = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
    # hand evaluation of the a = -0.5 piecewise cubic
    expected = [1.0, 1.5 * 0.125 - 2.5 * 0.25 + 1, 0.0, -0.5 * 3.375 + 2.5 * 2.25 - 6 + 2, 0.0, 0.0]
    np.testing.assert_allclose(imaging.cubic_kernel(d), expected, atol=1e-15)


@pytest.mark.parametrize("size", [(7, 5), (14, 10), (3, 2), (40, 31)])
def test_constant_image_stays_constant(size):
    img = ImagePlane(np.full((1, 9, 12), 0.37), "Y")
    out = imaging.bicubic_resize(img, *size)
    np.testing.assert_allclose(out.data, 0.37, atol=1e-12)


def test_unit_scale_is_identity(rng):
    img = ImagePlane(rng.random((1, 11, 13)), "Y")
    np.testing.assert_allclose(imaging.bicubic_resize(img, 13, 11).data, img.data, atol=1e-7)


@pytest.mark.parametrize("factor", [2, 3, 4])
def test_upscaled_ramp_stays_linear_in_interior(factor):
    w_in = 16
    ramp = np.tile(0.1 + 0.05 * np.arange(w_in), (5, 1))[None]
    out = imaging.bicubic_resize(ImagePlane(ramp, "Y"), w_in * factor, 5).data[0, 2]
    # interpolated positions map back to source coordinate (x + 0.5)/factor - 0.5
    src = (np.arange(w_in * factor) + 0.5) / factor - 0.5
    interior = (src >= 2) & (src <= w_in - 3)
    np.testing.assert_allclose(out[interior], 0.1 + 0.05 * src[interior], atol=1e-6)


def test_antialiased_downscale_averages():
    stripes = np.tile([0.0, 1.0], 32)[None, None, :].repeat(4, axis=1)
    out = imaging.bicubic_resize(ImagePlane(stripes, "Y"), 16, 4).data
    # a widened kernel removes the Nyquist pattern instead of aliasing it
    np.testing.assert_allclose(out[0, :, 2:-2], 0.5, atol=0.02)


def test_resize_output_clamped():
    step = np.zeros((1, 8, 8))
    step[:, :, 4:] = 1.0
    out = imaging.bicubic_resize(ImagePlane(step, "Y"), 32, 32)
    assert out.data.min() >= 0.0 and out.data.max() <= 1.0


def test_resize_weights_rows_sum_to_one():
    for n_in, n_out in [(10, 30), (30, 10), (7, 7), (9, 4)]:
        np.testing.assert_allclose(imaging.resize_weights(n_in, n_out).sum(axis=1), 1.0, atol=1e-12)


def test_resize_rejects_empty_output():
    with pytest.raises(ValueError):
        imaging.bicubic_resize(ImagePlane(np.zeros((1, 4, 4)), "Y"), 0, 3)


# --- degradation --------------------------------------------------------------------


def test_degrade_constant_gives_zero_residual():
    lr_interp, residual = imaging.degrade(ImagePlane(np.full((1, 24, 30), 0.6), "Y"), 3)
    np.testing.assert_allclose(residual, 0.0, atol=1e-12)
    np.testing.assert_allclose(lr_interp.data, 0.6, atol=1e-12)


def test_degrade_modcrop_dims():
    lr_interp, residual = imaging.degrade(ImagePlane(np.zeros((1, 100, 100)), "Y"), 3)
    assert lr_interp.data.shape == (1, 99, 99) and residual.shape == (1, 99, 99)
    assert imaging.modcrop(ImagePlane(np.zeros((1, 100, 100)), "Y"), 3).width == 99


def test_degrade_residual_reconstructs_hr(rng):
    hr = ImagePlane(rng.random((1, 20, 24)), "Y")
    lr_interp, residual = imaging.degrade(hr, 2)
    np.testing.assert_allclose(lr_interp.data + residual, hr.data, atol=1e-12)
    assert np.abs(residual).max() <= 1.0


def test_degrade_rejects_tiny_images():
    with pytest.raises(ValueError):
        imaging.degrade(ImagePlane(np.zeros((1, 2, 5)), "Y"), 3)


def test_degrade_deterministic(rng):
    hr = ImagePlane(rng.random((1, 16, 16)), "Y")
    a, b = imaging.degrade(hr, 2), imaging.degrade(hr, 2)
    assert a[0].data.tobytes() == b[0].data.tobytes() and a[1].tobytes() == b[1].tobytes()


def test_residual_energy_concentrates_on_edges():
    yy, xx = np.mgrid[:48, :48]
    checker = ((yy // 4 + xx // 4) % 2).astype(float)
    blurred = imaging.bicubic_resize(imaging.bicubic_resize(ImagePlane(checker[None], "Y"), 12, 12), 48, 48)
    e_sharp = np.mean(imaging.degrade(ImagePlane(checker[None], "Y"), 2)[1] ** 2)
    e_blur = np.mean(imaging.degrade(blurred, 2)[1] ** 2)
    assert e_sharp > e_blur > 0
