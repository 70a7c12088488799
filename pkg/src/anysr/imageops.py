"""Image I/O, color conversion, resampling and coordinate grids.

All raster data is H x W x 3 RGB in [0, 1], double precision. Pixel centers
follow the cell-center convention: sample i of an n-sample axis sits at
normalized coordinate -1 + (2i + 1)/n, so grids at different resolutions
stay mutually aligned.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np


class ImageFormatError(ValueError):
    """Malformed or unsupported image byte stream (message carries the byte offset)."""


@dataclass
class Image:
    """RGB raster with channel values clamped to [0, 1] on construction."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixels, got shape {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise ValueError("image dimensions must be at least 1x1")
        self.pixels = np.clip(self.pixels, 0.0, 1.0)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class CoordGrid:
    """Row-major (y, x) cell-center coordinates of a raster, each in (-1, 1)."""

    coords: np.ndarray
    source_height: int
    source_width: int


def axis_centers(n: int) -> np.ndarray:
    """Normalized cell-center positions of an n-sample axis."""
    return -1.0 + (2.0 * np.arange(n) + 1.0) / n


def make_coord_grid(h: int, w: int) -> CoordGrid:
    if h < 1 or w < 1:
        raise ValueError("grid dimensions must be at least 1")
    ys = axis_centers(h)
    xs = axis_centers(w)
    coords = np.stack(np.meshgrid(ys, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    return CoordGrid(coords=coords, source_height=h, source_width=w)


# -- color --------------------------------------------------------------


def rgb_to_y(image: Image) -> np.ndarray:
    """BT.601 studio-swing luma on the [0, 1] scale: (16 + 65.481R + 128.553G + 24.966B)/255."""
    r, g, b = image.pixels[..., 0], image.pixels[..., 1], image.pixels[..., 2]
    return (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0


# -- resampling ---------------------------------------------------------


def _source_positions(n: int, m: int) -> np.ndarray:
    """Continuous source index of each of m output centers against n source cells."""
    return (np.arange(m) + 0.5) * (n / m) - 0.5


def _catmull_rom(x: np.ndarray) -> np.ndarray:
    """Cubic convolution kernel with a = -0.5."""
    a = -0.5
    ax = np.abs(x)
    near = (a + 2.0) * ax ** 3 - (a + 3.0) * ax ** 2 + 1.0
    far = a * (ax ** 3 - 5.0 * ax ** 2 + 8.0 * ax - 4.0)
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def _resample_axis_cubic(data: np.ndarray, m: int) -> np.ndarray:
    """Catmull-Rom resample along axis 0, taps clamped at the borders."""
    n = data.shape[0]
    u = _source_positions(n, m)
    base = np.floor(u).astype(np.intp)
    t = u - base
    taps = np.stack([base - 1, base, base + 1, base + 2], axis=1)
    offsets = np.stack([-1.0 - t, -t, 1.0 - t, 2.0 - t], axis=1)
    weights = _catmull_rom(offsets)
    taps = np.clip(taps, 0, n - 1)
    gathered = data[taps]  # (m, 4, ...)
    return np.einsum("jt,jt...->j...", weights, gathered)


def _resample_axis_linear(data: np.ndarray, m: int) -> np.ndarray:
    n = data.shape[0]
    u = _source_positions(n, m)
    base = np.floor(u).astype(np.intp)
    t = u - base
    lo = np.clip(base, 0, n - 1)
    hi = np.clip(base + 1, 0, n - 1)
    shape = (m,) + (1,) * (data.ndim - 1)
    return data[lo] * (1.0 - t).reshape(shape) + data[hi] * t.reshape(shape)


def resample_bicubic(image: Image, out_h: int, out_w: int) -> Image:
    """Cell-center-aligned bicubic resample (Catmull-Rom), output clamped to [0, 1]."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be at least 1")
    data = _resample_axis_cubic(image.pixels, out_h)
    data = _resample_axis_cubic(data.transpose(1, 0, 2), out_w).transpose(1, 0, 2)
    return Image(np.clip(data, 0.0, 1.0))


def resample_bilinear(image: Image, out_h: int, out_w: int) -> Image:
    """Cell-center-aligned bilinear resample with border replication."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be at least 1")
    data = _resample_axis_linear(image.pixels, out_h)
    data = _resample_axis_linear(data.transpose(1, 0, 2), out_w).transpose(1, 0, 2)
    return Image(np.clip(data, 0.0, 1.0))


def resample_nearest(image: Image, out_h: int, out_w: int) -> Image:
    """Pick the nearest source cell center for each output cell center."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be at least 1")
    iy = np.clip(np.floor(_source_positions(image.height, out_h) + 0.5).astype(np.intp),
                 0, image.height - 1)
    ix = np.clip(np.floor(_source_positions(image.width, out_w) + 0.5).astype(np.intp),
                 0, image.width - 1)
    return Image(image.pixels[np.ix_(iy, ix)])


def scaled_size(scale: float, n: int) -> int:
    """Output length for a fractional scale: round(scale * n), at least 1."""
    return max(1, int(round(scale * n)))


# -- PNG ----------------------------------------------------------------

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _png_error(offset: int, message: str):
    raise ImageFormatError(f"malformed PNG at byte {offset}: {message}")


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, h: int, w: int, channels: int) -> np.ndarray:
    stride = w * channels
    expected = h * (stride + 1)
    if len(raw) != expected:
        _png_error(0, f"decompressed pixel stream has {len(raw)} bytes, expected {expected}")
    out = np.zeros((h, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.intp)
    for row in range(h):
        start = row * (stride + 1)
        ftype = raw[start]
        line = np.frombuffer(raw, dtype=np.uint8, count=stride, offset=start + 1).astype(np.intp)
        if ftype == 0:
            recon = line
        elif ftype == 1:
            recon = line.copy()
            for i in range(channels, stride):
                recon[i] = (recon[i] + recon[i - channels]) & 0xFF
        elif ftype == 2:
            recon = (line + prev) & 0xFF
        elif ftype == 3:
            recon = line.copy()
            for i in range(stride):
                left = recon[i - channels] if i >= channels else 0
                recon[i] = (recon[i] + ((left + prev[i]) >> 1)) & 0xFF
        elif ftype == 4:
            recon = line.copy()
            for i in range(stride):
                left = recon[i - channels] if i >= channels else 0
                upleft = prev[i - channels] if i >= channels else 0
                recon[i] = (recon[i] + _paeth(left, prev[i], upleft)) & 0xFF
        else:
            _png_error(start, f"unknown filter type {ftype}")
        out[row] = recon.astype(np.uint8)
        prev = recon
    return out.reshape(h, w, channels)


def _decode_png(data: bytes) -> Image:
    if len(data) < 8 or data[:8] != _PNG_SIGNATURE:
        _png_error(0, "bad signature")
    pos = 8
    header = None
    idat = bytearray()
    seen_end = False
    while pos < len(data):
        if pos + 8 > len(data):
            _png_error(pos, "truncated chunk header")
        length, = struct.unpack(">I", data[pos:pos + 4])
        ctype = data[pos + 4:pos + 8]
        body_start = pos + 8
        if body_start + length + 4 > len(data):
            _png_error(pos, f"truncated {ctype.decode('latin1')} chunk")
        body = data[body_start:body_start + length]
        crc, = struct.unpack(">I", data[body_start + length:body_start + length + 4])
        if crc != zlib.crc32(ctype + body) & 0xFFFFFFFF:
            _png_error(body_start + length, f"bad CRC in {ctype.decode('latin1')} chunk")
        if ctype == b"IHDR":
            if length != 13:
                _png_error(pos, "IHDR length must be 13")
            w, h, depth, color, comp, filt, interlace = struct.unpack(">IIBBBBB", body)
            if depth != 8 or color not in (2, 6):
                _png_error(body_start, f"unsupported format (bit depth {depth}, color type {color})")
            if comp != 0 or filt != 0 or interlace != 0:
                _png_error(body_start, "unsupported compression/filter/interlace method")
            header = (h, w, 4 if color == 6 else 3)
        elif ctype == b"IDAT":
            if header is None:
                _png_error(pos, "IDAT before IHDR")
            idat.extend(body)
        elif ctype == b"IEND":
            seen_end = True
            break
        pos = body_start + length + 4
    if header is None:
        _png_error(pos, "missing IHDR chunk")
    if not seen_end:
        _png_error(len(data), "missing IEND chunk")
    if not idat:
        _png_error(len(data), "missing IDAT data")
    h, w, channels = header
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        _png_error(len(data), f"zlib failure: {exc}")
    pixels = _unfilter(raw, h, w, channels)[..., :3]
    return Image(pixels.astype(np.float64) / 255.0)


def _encode_png(image: Image) -> bytes:
    quantized = np.round(image.pixels * 255.0).astype(np.uint8)
    h, w = quantized.shape[:2]
    rows = bytearray()
    for row in range(h):
        rows.append(0)  # filter: none
        rows.extend(quantized[row].tobytes())
    compressed = zlib.compress(bytes(rows), 9)

    def chunk(ctype: bytes, body: bytes) -> bytes:
        return (struct.pack(">I", len(body)) + ctype + body
                + struct.pack(">I", zlib.crc32(ctype + body) & 0xFFFFFFFF))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (_PNG_SIGNATURE + chunk(b"IHDR", ihdr) + chunk(b"IDAT", compressed)
            + chunk(b"IEND", b""))


# -- PPM (binary P6) ----------------------------------------------------


def _decode_ppm(data: bytes) -> Image:
    pos = 2  # past magic

    def next_token():
        nonlocal pos
        while pos < len(data):
            if data[pos:pos + 1].isspace():
                pos += 1
            elif data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"malformed PPM at byte {start}: missing header field")
        return data[start:pos]

    try:
        w, h, maxval = (int(next_token()) for _ in range(3))
    except ValueError:
        raise ImageFormatError(f"malformed PPM at byte {pos}: non-numeric header field") from None
    if maxval != 255:
        raise ImageFormatError(f"malformed PPM at byte {pos}: only maxval 255 supported")
    pos += 1  # single whitespace after maxval
    need = w * h * 3
    if len(data) - pos < need:
        raise ImageFormatError(
            f"malformed PPM at byte {len(data)}: expected {need} pixel bytes, got {len(data) - pos}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(h, w, 3)
    return Image(pixels.astype(np.float64) / 255.0)


def _encode_ppm(image: Image) -> bytes:
    quantized = np.round(image.pixels * 255.0).astype(np.uint8)
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + quantized.tobytes()


# -- dispatch -----------------------------------------------------------


def decode_image(data: bytes) -> Image:
    """Decode PNG (8-bit RGB/RGBA, alpha discarded) or binary PPM bytes."""
    if data[:8] == _PNG_SIGNATURE:
        return _decode_png(data)
    if data[:2] == b"P6":
        return _decode_ppm(data)
    raise ImageFormatError("malformed image at byte 0: not a PNG or binary PPM stream")


def encode_image(image: Image, format: str = "png") -> bytes:
    """Encode to PNG or binary PPM; 8-bit channels, round-to-nearest."""
    if format == "png":
        return _encode_png(image)
    if format == "ppm":
        return _encode_ppm(image)
    raise ValueError(f"unsupported format {format!r}")


def load_image(path) -> Image:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def save_image(image: Image, path):
    path = str(path)
    format = "ppm" if path.endswith((".ppm", ".PPM")) else "png"
    with open(path, "wb") as fh:
        fh.write(encode_image(image, format))
