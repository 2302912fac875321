"""The five FL-class augmentations, applied to one processed raster.

Each augmentation acts on the clamped magnetic field values before byte
scaling; the results are written next to the original as PGMs so they
can be compared visually.
"""

import os

import numpy as np

from ordflare import raster_io
from ordflare.augment import AUGMENT_KINDS, AUGMENT_SUFFIXES, AugmentSpec, apply, sample_seed
from ordflare.preprocess import clamp_denoise, pad_or_select, scale_to_bytes

OUT = os.path.join(os.path.dirname(__file__), "output")


def processed_example(seed=5):
    rng = np.random.default_rng(seed)
    raster = rng.normal(0.0, 30.0, size=(300, 420))
    yy, xx = np.mgrid[0:300, 0:420]
    raster += 700.0 * np.exp(-(((xx - 160) / 30.0) ** 2 + ((yy - 150) / 26.0) ** 2))
    raster -= 700.0 * np.exp(-(((xx - 250) / 30.0) ** 2 + ((yy - 150) / 26.0) ** 2))
    return pad_or_select(clamp_denoise(raster))


def main():
    os.makedirs(OUT, exist_ok=True)
    raster = processed_example()
    raster_io.write_pgm(scale_to_bytes(raster), os.path.join(OUT, "aug_original.pgm"))
    print("original -> aug_original.pgm")

    for kind in AUGMENT_KINDS:
        if kind == "random_noise":
            spec = AugmentSpec(kind, seed=sample_seed("demo", 42))
        elif kind == "gaussian_blur":
            spec = AugmentSpec(kind, blur_sigma=1.0)
        else:
            spec = AugmentSpec(kind)
        out = apply(spec, raster)
        name = f"aug_{AUGMENT_SUFFIXES[kind]}.pgm"
        raster_io.write_pgm(scale_to_bytes(out), os.path.join(OUT, name))
        delta = np.max(np.abs(out - raster))
        print(f"{kind:18s} -> {name}  (max |change| {delta:.1f} G)")


if __name__ == "__main__":
    main()
