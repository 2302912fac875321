"""The five FL-class raster augmentations.

All of them act on processed (clamped, 512x512) rasters before byte
scaling and never change the sample's flare class: polarity inversion,
Gaussian blur, vertical flip, horizontal flip, and bounded random noise.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .preprocess import FLUX_CAP, NOISE_FLOOR, _as_raster

__all__ = [
    "AugmentSpec",
    "AUGMENT_KINDS",
    "AUGMENT_SUFFIXES",
    "polarity_inversion",
    "gaussian_blur",
    "vflip",
    "hflip",
    "random_noise",
    "apply",
    "sample_seed",
]

AUGMENT_KINDS = ("polarity_inversion", "gaussian_blur", "vflip", "hflip", "random_noise")

# File-name suffix per augmentation kind, used by the CLI.
AUGMENT_SUFFIXES = {
    "polarity_inversion": "pol",
    "gaussian_blur": "blur",
    "vflip": "vflip",
    "hflip": "hflip",
    "random_noise": "noise",
}


def polarity_inversion(raster):
    """Swap magnetic polarities: v -> -v."""
    return -_as_raster(raster)


def _gaussian_kernel(sigma):
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(raster, sigma=1.0):
    """Separable Gaussian smoothing.

    Kernel radius ceil(3*sigma), weights normalized to 1, edges handled
    by reflection, so constant rasters pass through unchanged.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = _as_raster(raster)
    k = _gaussian_kernel(sigma)
    out = ndimage.correlate1d(r, k, axis=0, mode="reflect")
    return ndimage.correlate1d(out, k, axis=1, mode="reflect")


def vflip(raster):
    """Flip along the horizontal axis (row reversal)."""
    return _as_raster(raster)[::-1, :].copy()


def hflip(raster):
    """Flip along the vertical axis (column reversal)."""
    return _as_raster(raster)[:, ::-1].copy()


def random_noise(raster, seed, bound=NOISE_FLOOR):
    """Add i.i.d. uniform noise on [-bound, +bound] Gauss per pixel.

    The generator is seeded, so a fixed seed reproduces the output
    exactly regardless of processing order.
    """
    r = _as_raster(raster)
    rng = np.random.default_rng(seed)
    return r + rng.uniform(-bound, bound, size=r.shape)


def sample_seed(sample_id, global_seed):
    """Stable per-sample noise seed: global seed mixed with the id hash."""
    digest = hashlib.sha256(str(sample_id).encode("utf-8")).digest()
    return int(global_seed) ^ int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class AugmentSpec:
    """One augmentation to apply: its kind plus kind-specific knobs.

    ``seed`` is required for (and only for) random_noise; ``blur_sigma``
    is meaningful only for gaussian_blur (default 1.0 pixel).
    """

    kind: str
    seed: "int | None" = None
    blur_sigma: "float | None" = None

    def __post_init__(self):
        if self.kind not in AUGMENT_KINDS:
            raise ValueError(f"unknown augmentation kind {self.kind!r}")
        if (self.seed is not None) != (self.kind == "random_noise"):
            raise ValueError("seed is required iff kind is random_noise")
        if self.blur_sigma is not None and self.kind != "gaussian_blur":
            raise ValueError("blur_sigma applies only to gaussian_blur")


def apply(spec, raster, reclamp=True):
    """Apply one augmentation; noisy outputs are re-clamped to +/-256 G
    so downstream byte scaling keeps its precondition."""
    if spec.kind == "polarity_inversion":
        return polarity_inversion(raster)
    if spec.kind == "gaussian_blur":
        sigma = 1.0 if spec.blur_sigma is None else spec.blur_sigma
        return gaussian_blur(raster, sigma)
    if spec.kind == "vflip":
        return vflip(raster)
    if spec.kind == "hflip":
        return hflip(raster)
    noisy = random_noise(raster, spec.seed)
    if reclamp:
        noisy = np.clip(noisy, -FLUX_CAP, FLUX_CAP)
    return noisy
