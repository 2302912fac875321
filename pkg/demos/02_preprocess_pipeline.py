"""Walk a synthetic AR patch through the preprocessing pipeline.

Builds a bipolar magnetogram raster wider than the 512-pixel frame, a
bitmap mask around the active region, and shows what each stage does:
mask crop, width filter, clamp/denoise, maximum-USFLUX window selection
and byte scaling.  The final image is written as a PGM.
"""

import os

import numpy as np

from ordflare import raster_io
from ordflare.preprocess import (
    clamp_denoise,
    mask_crop,
    max_usflux_window,
    pad_or_select,
    scale_to_bytes,
    size_filter,
    summed_area_table,
)

OUT = os.path.join(os.path.dirname(__file__), "output")


def synthetic_patch(seed=11):
    """700x240 raster: quiet background plus a bipolar sunspot group."""
    rng = np.random.default_rng(seed)
    raster = rng.normal(0.0, 18.0, size=(240, 700))
    yy, xx = np.mgrid[0:240, 0:700]
    for cx, sign in ((430, +1.0), (490, -1.0)):
        blob = np.exp(-(((xx - cx) / 40.0) ** 2 + ((yy - 120) / 35.0) ** 2))
        raster += sign * 900.0 * blob
    mask = np.zeros((240, 700), dtype=np.uint8)
    mask[20:220, 60:680] = 1
    return raster.astype(np.float32), mask


def main():
    os.makedirs(OUT, exist_ok=True)
    raster, mask = synthetic_patch()
    print(f"raw raster: {raster.shape[1]}x{raster.shape[0]} px, "
          f"field range [{raster.min():.0f}, {raster.max():.0f}] G")

    cropped = mask_crop(raster, mask)
    print(f"after mask crop: {cropped.shape[1]}x{cropped.shape[0]} px")
    print(f"width filter (>= 70 px): {'keep' if size_filter(cropped) else 'drop'}")

    cleaned = clamp_denoise(cropped)
    nz = np.abs(cleaned[cleaned != 0])
    print(f"after clamp/denoise: nonzero magnitudes in [{nz.min():.1f}, {nz.max():.1f}] G")

    padded = np.pad(cleaned, ((0, 512 - cleaned.shape[0]), (0, 0))) \
        if cleaned.shape[0] < 512 else cleaned
    row, col = max_usflux_window(padded, 512)
    sat = summed_area_table(padded)
    print(f"max-USFLUX 512x512 window at (row {row}, col {col}), "
          f"unsigned flux {sat.rect_sum(row, col, row + 512, col + 512):.0f} G")

    framed = pad_or_select(cleaned)
    image = scale_to_bytes(framed)
    print(f"final frame: {framed.shape[1]}x{framed.shape[0]}, "
          f"bytes in [{image.min()}, {image.max()}]")

    path = os.path.join(OUT, "processed_patch.pgm")
    raster_io.write_pgm(image, path)
    print(f"image: {path}")


if __name__ == "__main__":
    main()
