"""Binary file formats for magnetogram rasters, AR masks and images.

MGR1  ASCII magic ``MGR1``, little-endian u32 width, u32 height, then
      width*height little-endian float32 values, row-major, in Gauss.
MSK1  ASCII magic ``MSK1``, u32 width, u32 height, then width*height
      unsigned bytes (0 = outside the AR, nonzero = inside).
PGM   binary ``P5`` with maxval 255.
"""

import struct

import numpy as np

__all__ = [
    "read_raster",
    "write_raster",
    "read_mask",
    "write_mask",
    "read_pgm",
    "write_pgm",
    "FormatError",
]

_MGR_MAGIC = b"MGR1"
_MSK_MAGIC = b"MSK1"


class FormatError(ValueError):
    """Raised when a raster/mask/image file does not match its format."""


def _read_header(fh, magic, path):
    got = fh.read(4)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    header = fh.read(8)
    if len(header) != 8:
        raise FormatError(f"{path}: truncated header")
    width, height = struct.unpack("<II", header)
    if width == 0 or height == 0:
        raise FormatError(f"{path}: zero dimension {width}x{height}")
    return width, height


def read_raster(path):
    """Load an MGR1 file as a float32 array of shape (height, width)."""
    with open(path, "rb") as fh:
        width, height = _read_header(fh, _MGR_MAGIC, path)
        payload = fh.read()
    expected = 4 * width * height
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite raster values")
    return values.astype(np.float32)


def write_raster(values, path):
    values = np.asarray(values)
    if values.ndim != 2 or values.size == 0:
        raise ValueError("raster must be a non-empty 2-D array")
    if not np.all(np.isfinite(values)):
        raise ValueError("raster values must be finite")
    height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(_MGR_MAGIC)
        fh.write(struct.pack("<II", width, height))
        fh.write(values.astype("<f4").tobytes())


def read_mask(path):
    """Load an MSK1 file as a uint8 array of shape (height, width)."""
    with open(path, "rb") as fh:
        width, height = _read_header(fh, _MSK_MAGIC, path)
        payload = fh.read()
    expected = width * height
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def write_mask(values, path):
    values = np.asarray(values, dtype=np.uint8)
    if values.ndim != 2 or values.size == 0:
        raise ValueError("mask must be a non-empty 2-D array")
    height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(_MSK_MAGIC)
        fh.write(struct.pack("<II", width, height))
        fh.write(values.tobytes())


def write_pgm(image, path):
    """Write a uint8 image as binary PGM (P5, maxval 255)."""
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError("PGM output requires a 2-D uint8 array")
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P5":
        raise FormatError(f"{path}: not a binary P5 PGM")
    try:
        width, height = (int(tok) for tok in parts[1].split())
        maxval = int(parts[2])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    payload = parts[3]
    if len(payload) != width * height:
        raise FormatError(f"{path}: expected {width * height} pixel bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
