"""Magnetogram raster preprocessing.

The pipeline turns a variable-size AR patch raster plus its bitmap mask
into a fixed 512x512 byte image: mask-driven crop, 70-pixel width
filter, flux clamp/denoise, zero-padding or maximum-unsigned-flux window
selection, and byte scaling.  Rasters are 2-D numpy arrays of magnetic
field strength in Gauss, shape (height, width).
"""

import numpy as np

__all__ = [
    "EmptyRegionError",
    "SummedAreaTable",
    "mask_crop",
    "size_filter",
    "clamp_denoise",
    "summed_area_table",
    "max_usflux_window",
    "pad_or_select",
    "scale_to_bytes",
    "process",
    "TARGET_SIZE",
    "MIN_WIDTH",
    "FLUX_CAP",
    "NOISE_FLOOR",
]

TARGET_SIZE = 512
MIN_WIDTH = 70
FLUX_CAP = 256.0
NOISE_FLOOR = 25.0

# Fixed-point quantization step for unsigned-flux accumulation: 0.001 G.
# Sums are integers, so the window argmax is bit-reproducible.
_QUANT = 1000.0


class EmptyRegionError(ValueError):
    """The bitmap mask marks no pixel as inside the AR."""


def _as_raster(values):
    a = np.asarray(values, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("raster must be a non-empty 2-D array")
    if not np.all(np.isfinite(a)):
        raise ValueError("raster values must be finite")
    return a


def mask_crop(raster, mask, cutoff=0):
    """Crop to the tight bounding box of in-AR pixels.

    A pixel is inside when its mask value exceeds ``cutoff`` (default:
    any nonzero byte).  Pixels within the box but outside the mask are
    zeroed so only AR signal survives.
    """
    r = _as_raster(raster)
    m = np.asarray(mask)
    if m.shape != r.shape:
        raise ValueError(f"mask shape {m.shape} does not match raster shape {r.shape}")
    inside = m > cutoff
    if not inside.any():
        raise EmptyRegionError("mask marks no pixel as inside the AR")
    rows = np.flatnonzero(inside.any(axis=1))
    cols = np.flatnonzero(inside.any(axis=0))
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = cols[0], cols[-1] + 1
    out = np.where(inside[r0:r1, c0:c1], r[r0:r1, c0:c1], 0.0)
    return out


def size_filter(raster, min_width=MIN_WIDTH):
    """Keep decision: drop any patch narrower than ``min_width`` pixels.

    Only the width is tested; arbitrarily flat patches pass.
    """
    return _as_raster(raster).shape[1] >= min_width


def clamp_denoise(raster, cap=FLUX_CAP, noise_floor=NOISE_FLOOR):
    """Zero the +/-noise_floor band, cap magnitudes at +/-cap.

    v -> 0 if |v| <= noise_floor, else sign(v) * min(|v|, cap).  Both
    boundaries are inclusive: exactly +/-25 G is zeroed, exactly
    +/-256 G passes unclipped.
    """
    r = _as_raster(raster)
    out = np.sign(r) * np.minimum(np.abs(r), cap)
    out[np.abs(r) <= noise_floor] = 0.0
    return out


def _quantize(raster):
    return np.rint(np.abs(_as_raster(raster)) * _QUANT).astype(np.int64)


class SummedAreaTable:
    """Prefix sums of quantized |value| for O(1) rectangle flux sums.

    Accumulation happens on int64 milligauss, so rectangle sums are
    exact and platform-independent.
    """

    def __init__(self, raster):
        q = _quantize(raster)
        self._cum = q.cumsum(axis=0).cumsum(axis=1)
        self.height, self.width = q.shape

    @property
    def table(self):
        """Cumulative |value| sums in Gauss (dequantized view)."""
        return self._cum / _QUANT

    def rect_sum_quantized(self, top, left, bottom, right):
        """Exact unsigned-flux sum in milligauss over rows [top, bottom)
        and columns [left, right)."""
        if not (0 <= top < bottom <= self.height and 0 <= left < right <= self.width):
            raise ValueError("rectangle out of bounds")
        c = self._cum
        total = c[bottom - 1, right - 1]
        if top > 0:
            total = total - c[top - 1, right - 1]
        if left > 0:
            total = total - c[bottom - 1, left - 1]
        if top > 0 and left > 0:
            total = total + c[top - 1, left - 1]
        return int(total)

    def rect_sum(self, top, left, bottom, right):
        """Rectangle unsigned-flux sum in Gauss."""
        return self.rect_sum_quantized(top, left, bottom, right) / _QUANT

    def window_sums(self, k):
        """Quantized flux sums of every k x k window, stride 1."""
        if k < 1 or k > self.height or k > self.width:
            raise ValueError(f"window side {k} exceeds raster {self.height}x{self.width}")
        c = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
        c[1:, 1:] = self._cum
        return c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]


def summed_area_table(raster):
    return SummedAreaTable(raster)


def max_usflux_window(raster, k):
    """Top-left corner of the k x k window with maximal unsigned flux.

    Slides with stride 1; ties break to the smallest row, then column.
    The raster must already be at least k x k (pad first if not).
    """
    r = _as_raster(raster)
    if r.shape[0] < k or r.shape[1] < k:
        raise ValueError(
            f"raster {r.shape[0]}x{r.shape[1]} is smaller than the {k}x{k} window; pad first"
        )
    sums = SummedAreaTable(r).window_sums(k)
    flat = int(np.argmax(sums))  # row-major argmax = smallest (row, col) tie-break
    return flat // sums.shape[1], flat % sums.shape[1]


def _pad_axis(size, target):
    total = max(target - size, 0)
    before = total // 2
    return before, total - before


def pad_or_select(raster, target=TARGET_SIZE):
    """Force a raster to exactly target x target.

    Dimensions below the target are zero-padded symmetrically, with the
    odd pixel going to the trailing side; dimensions above it are
    resolved by the maximum-unsigned-flux window.
    """
    r = _as_raster(raster)
    h, w = r.shape
    pt, pb = _pad_axis(h, target)
    pl, pr = _pad_axis(w, target)
    if pt or pb or pl or pr:
        r = np.pad(r, ((pt, pb), (pl, pr)), mode="constant")
    if r.shape[0] > target or r.shape[1] > target:
        row, col = max_usflux_window(r, target)
        r = r[row:row + target, col:col + target]
    return r


def scale_to_bytes(raster, cap=FLUX_CAP):
    """Affine map of [-cap, +cap] Gauss onto bytes 0..255, round-half-up.

    With the default cap of 256: byte = floor((v + 256) / 512 * 255 + 0.5),
    so -256 -> 0, 0 -> 128, +256 -> 255 and the map is monotone.
    """
    r = _as_raster(raster)
    if np.any(np.abs(r) > cap):
        raise ValueError(f"scale_to_bytes requires |values| <= {cap} G; clamp first")
    scaled = np.floor((r + cap) / (2.0 * cap) * 255.0 + 0.5)
    return scaled.astype(np.uint8)


def process(raster, mask, min_width=MIN_WIDTH, cap=FLUX_CAP, noise_floor=NOISE_FLOOR,
            target=TARGET_SIZE):
    """Full pipeline; returns (byte_image, processed_raster) or None.

    Order of operations: mask crop, width filter, clamp/denoise,
    pad-or-select to target, byte scaling.  ``None`` means the patch was
    dropped by the size filter.  The processed raster is the clamped
    target x target field augmentations operate on.
    """
    cropped = mask_crop(raster, mask)
    if not size_filter(cropped, min_width):
        return None
    cleaned = clamp_denoise(cropped, cap=cap, noise_floor=noise_floor)
    framed = pad_or_select(cleaned, target=target)
    return scale_to_bytes(framed, cap=cap), framed
