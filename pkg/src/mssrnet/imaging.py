"""Image planes, BMP/PNG I/O, BT.601 colour conversion and bicubic resampling."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ImageIOError

MODES = {"RGB": 3, "Y": 1, "YCbCr": 3}


@dataclass
class ImagePlane:
    """Float samples in [0, 1], stored as a (channels, height, width) array."""

    data: np.ndarray
    mode: str = "RGB"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown image mode {self.mode!r}")
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 2:
            self.data = self.data[None]
        if self.data.ndim != 3 or self.data.shape[0] != MODES[self.mode]:
            raise ValueError(f"{self.mode} image needs {MODES[self.mode]} channels, got array {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[0]


# --- colour conversion -------------------------------------------------------

# BT.601 studio swing, inputs in [0, 1], outputs in 8-bit units before /255
_YCBCR_MATRIX = np.array(
    [
        [65.481, 128.553, 24.966],
        [-37.797, -74.203, 112.0],
        [112.0, -93.786, -18.214],
    ]
)
_YCBCR_OFFSET = np.array([16.0, 128.0, 128.0])


def _require(img: ImagePlane, mode: str) -> None:
    if img.mode != mode:
        raise ValueError(f"expected a {mode} image, got {img.mode}")


def rgb_to_ycbcr(img: ImagePlane) -> ImagePlane:
    _require(img, "RGB")
    out = np.tensordot(_YCBCR_MATRIX, img.data, axes=1) + _YCBCR_OFFSET[:, None, None]
    return ImagePlane(np.clip(out / 255.0, 0.0, 1.0), "YCbCr")


def rgb_to_y(img: ImagePlane) -> ImagePlane:
    _require(img, "RGB")
    y = np.tensordot(_YCBCR_MATRIX[0], img.data, axes=1) + _YCBCR_OFFSET[0]
    return ImagePlane(np.clip(y / 255.0, 0.0, 1.0)[None], "Y")


def ycbcr_to_rgb(img: ImagePlane) -> ImagePlane:
    _require(img, "YCbCr")
    shifted = img.data * 255.0 - _YCBCR_OFFSET[:, None, None]
    rgb = np.tensordot(np.linalg.inv(_YCBCR_MATRIX), shifted, axes=1)
    return ImagePlane(np.clip(rgb, 0.0, 1.0), "RGB")


def merge_ycbcr(y: ImagePlane, cbcr: ImagePlane) -> ImagePlane:
    """Replace the luminance of a YCbCr image with ``y``."""
    _require(y, "Y")
    _require(cbcr, "YCbCr")
    data = cbcr.data.copy()
    data[0] = y.data[0]
    return ImagePlane(data, "YCbCr")


# --- resampling ----------------------------------------------------------------


def cubic_kernel(d: np.ndarray, a: float = -0.5) -> np.ndarray:
    d = np.abs(d)
    d2, d3 = d * d, d * d * d
    near = (a + 2) * d3 - (a + 3) * d2 + 1
    far = a * d3 - 5 * a * d2 + 8 * a * d - 4 * a
    return np.where(d <= 1, near, np.where(d <= 2, far, 0.0))


def resize_weights(in_size: int, out_size: int) -> np.ndarray:
    """Dense (out_size, in_size) interpolation matrix for one axis."""
    ratio = in_size / out_size
    # widen the kernel when shrinking so it low-pass filters
    stretch = max(ratio, 1.0)
    radius = 2.0 * stretch
    centers = (np.arange(out_size) + 0.5) * ratio - 0.5
    first = np.floor(centers - radius).astype(int) + 1
    taps = int(math.ceil(2 * radius)) + 1
    idx = first[:, None] + np.arange(taps)[None, :]
    weights = cubic_kernel((centers[:, None] - idx) / stretch)
    weights /= weights.sum(axis=1, keepdims=True)
    matrix = np.zeros((out_size, in_size))
    rows = np.repeat(np.arange(out_size), taps)
    np.add.at(matrix, (rows, np.clip(idx, 0, in_size - 1).ravel()), weights.ravel())
    return matrix


def bicubic_resize(img: ImagePlane, out_width: int, out_height: int) -> ImagePlane:
    if out_width < 1 or out_height < 1:
        raise ValueError(f"output size must be positive, got {out_width}x{out_height}")
    rows = resize_weights(img.height, out_height)
    cols = resize_weights(img.width, out_width)
    out = np.einsum("oh,chw,pw->cop", rows, img.data, cols, optimize=True)
    return ImagePlane(np.clip(out, 0.0, 1.0), img.mode)


def modcrop(img: ImagePlane, scale: int) -> ImagePlane:
    """Crop bottom/right so both dimensions are multiples of ``scale``."""
    if img.height < scale or img.width < scale:
        raise ValueError(f"image {img.width}x{img.height} is smaller than scale {scale}")
    h = img.height - img.height % scale
    w = img.width - img.width % scale
    return ImagePlane(img.data[:, :h, :w].copy(), img.mode)


def degrade(hr: ImagePlane, scale: int):
    """Simulate the LR input for ``hr``.

    Returns ``(lr_interp, residual_target)`` where ``lr_interp`` is the
    bicubic down-then-up image at the (cropped) HR size and
    ``residual_target = hr - lr_interp`` (an unclamped float array).
    """
    hr = modcrop(hr, scale)
    lr = bicubic_resize(hr, hr.width // scale, hr.height // scale)
    lr_interp = bicubic_resize(lr, hr.width, hr.height)
    return lr_interp, hr.data - lr_interp.data


# --- file I/O ------------------------------------------------------------------


def quantize(samples: np.ndarray) -> np.ndarray:
    """[0, 1] floats to uint8, rounding half away from zero after clamping."""
    return np.floor(np.clip(samples, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _to_rgb_bytes(img: ImagePlane) -> np.ndarray:
    if img.mode == "YCbCr":
        img = ycbcr_to_rgb(img)
    data = quantize(img.data)
    if img.mode == "Y":
        data = np.repeat(data, 3, axis=0)
    return data.transpose(1, 2, 0)  # (H, W, 3)


def _read_bmp(raw: bytes) -> np.ndarray:
    if raw[:2] != b"BM":
        raise FormatError("not a BMP file (bad magic bytes)")
    if len(raw) < 54:
        raise ImageIOError("truncated BMP header")
    offset = struct.unpack_from("<I", raw, 10)[0]
    header_size, width, height, planes, bpp, compression = struct.unpack_from("<IiiHHI", raw, 14)
    if header_size < 40:
        raise FormatError(f"unsupported BMP info header of {header_size} bytes")
    if bpp != 24 or compression != 0:
        raise FormatError(f"only 24-bit uncompressed BMP is supported (got {bpp} bpp, compression {compression})")
    if width <= 0 or height == 0:
        raise FormatError(f"invalid BMP dimensions {width}x{height}")
    top_down = height < 0
    height = abs(height)
    stride = (width * 3 + 3) & ~3
    if len(raw) < offset + stride * height:
        raise ImageIOError(f"truncated BMP pixel data: need {offset + stride * height} bytes, have {len(raw)}")
    rows = np.frombuffer(raw, dtype=np.uint8, count=stride * height, offset=offset).reshape(height, stride)
    pixels = rows[:, : width * 3].reshape(height, width, 3)[:, :, ::-1]  # BGR -> RGB
    if not top_down:
        pixels = pixels[::-1]
    return pixels


def _write_bmp(pixels: np.ndarray) -> bytes:
    height, width, _ = pixels.shape
    stride = (width * 3 + 3) & ~3
    body = np.zeros((height, stride), dtype=np.uint8)
    body[:, : width * 3] = pixels[::-1, :, ::-1].reshape(height, width * 3)
    image_size = stride * height
    file_header = struct.pack("<2sIHHI", b"BM", 54 + image_size, 0, 0, 54)
    info_header = struct.pack("<IiiHHIIiiII", 40, width, height, 1, 24, 0, image_size, 2835, 2835, 0, 0)
    return file_header + info_header + body.tobytes()


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I"):
                gray = np.asarray(im, dtype=np.float64) / 65535.0
                return np.repeat(np.clip(gray, 0, 1)[None], 3, axis=0)
            if mode in ("L", "LA"):
                gray = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
                return np.repeat(gray[None], 3, axis=0)
            if mode in ("RGB", "RGBA", "P"):
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
                return rgb.transpose(2, 0, 1)
    except OSError as exc:
        raise ImageIOError(f"cannot decode PNG {path}: {exc}") from exc
    raise FormatError(f"unsupported PNG pixel mode {mode!r} in {path}")


def load_image(path) -> ImagePlane:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"BM":
        return ImagePlane(_read_bmp(raw).transpose(2, 0, 1) / 255.0, "RGB")
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return ImagePlane(_read_png(path), "RGB")
    raise FormatError(f"{path}: unrecognised image format (expected BMP or PNG)")


def save_image(img: ImagePlane, path) -> None:
    path = Path(path)
    pixels = _to_rgb_bytes(img)
    suffix = path.suffix.lower()
    if suffix == ".bmp":
        path.write_bytes(_write_bmp(pixels))
    elif suffix == ".png":
        from PIL import Image

        if img.mode == "Y":
            Image.fromarray(np.ascontiguousarray(pixels[:, :, 0]), "L").save(path)
        else:
            Image.fromarray(np.ascontiguousarray(pixels), "RGB").save(path)
    else:
        raise ValueError(f"cannot infer image format from extension {suffix!r}")
