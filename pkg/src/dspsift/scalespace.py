"""Gaussian octave pyramid, gradient fields, and the scale -> octave lookup."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DataError

ASSUMED_CAMERA_BLUR = 0.5


@dataclass(frozen=True)
class ScaleSpace:
    """Octave pyramid: level (o, l) holds the image blurred to
    sigma0 * 2^(o + l/S) in original pixel units and downsampled by 2^o."""

    octaves: list[list[np.ndarray]]
    sigma0: float = 1.6
    levels_per_octave: int = 3
    base_shape: tuple[int, int] = (0, 0)

    @property
    def n_octaves(self) -> int:
        return len(self.octaves)

    def sigma(self, o: int, l: int) -> float:
        return self.sigma0 * 2.0 ** (o + l / self.levels_per_octave)

    def level(self, o: int, l: int) -> np.ndarray:
        return self.octaves[o][l]


@dataclass(frozen=True)
class GradientField:
    mag: np.ndarray  # (H, W), >= 0
    ori: np.ndarray  # (H, W), in [0, 2*pi)

    @property
    def width(self) -> int:
        return self.mag.shape[1]

    @property
    def height(self) -> int:
        return self.mag.shape[0]


def build_scale_space(
    img,
    sigma0: float = 1.6,
    levels_per_octave: int = 3,
    n_octaves: int | None = None,
) -> ScaleSpace:
    """Blur incrementally and decimate by 2 per octave.

    The input is assumed to carry blur ASSUMED_CAMERA_BLUR; every incremental
    kernel is sqrt(target^2 - previous^2). Decimation takes every other pixel,
    the preceding blur doubling as the anti-aliasing filter.
    """
    pixels = np.asarray(img.pixels if hasattr(img, "pixels") else img, dtype=np.float64)
    min_side = min(pixels.shape)
    if n_octaves is None:
        n_octaves = max(1, int(math.floor(math.log2(min_side))) - 3)
    if n_octaves < 1:
        raise DataError("n_octaves must be >= 1")
    if min_side <= 2**n_octaves:
        raise DataError(
            f"image of min side {min_side} too small for {n_octaves} octaves"
        )
    S = levels_per_octave
    inc0 = math.sqrt(max(sigma0**2 - ASSUMED_CAMERA_BLUR**2, 1e-6))
    current = gaussian_filter(pixels, inc0, mode="nearest")
    octaves = []
    for _o in range(n_octaves):
        levels = [current]
        # relative (within-octave) blur of level l is sigma0 * 2^(l/S)
        for l in range(1, S):
            prev = sigma0 * 2.0 ** ((l - 1) / S)
            target = sigma0 * 2.0 ** (l / S)
            inc = math.sqrt(target**2 - prev**2)
            levels.append(gaussian_filter(levels[-1], inc, mode="nearest"))
        octaves.append(levels)
        prev = sigma0 * 2.0 ** ((S - 1) / S)
        inc = math.sqrt((2 * sigma0) ** 2 - prev**2)
        next_base = gaussian_filter(levels[-1], inc, mode="nearest")
        current = next_base[::2, ::2]
    return ScaleSpace(
        octaves=octaves,
        sigma0=sigma0,
        levels_per_octave=S,
        base_shape=pixels.shape,
    )


def gradients(level) -> GradientField:
    """Central differences inside, one-sided at the borders."""
    arr = np.asarray(level.pixels if hasattr(level, "pixels") else level,
                     dtype=np.float64)
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise DataError("gradients need an image of at least 2x2 pixels")
    gy, gx = np.gradient(arr)
    mag = np.hypot(gx, gy)
    ori = np.arctan2(gy, gx) % (2.0 * np.pi)
    return GradientField(mag=mag, ori=ori)


def octave_for_scale(sigma: float, ss: ScaleSpace, with_flag: bool = False):
    """Pyramid coordinates (o, l) whose blur is nearest to sigma in log space.

    Ties go to the smaller (o, l); sigma below sigma0 clamps to (0, 0).
    """
    if sigma <= 0:
        raise DataError(f"scale must be positive, got {sigma}")
    clamped = sigma < ss.sigma0
    if clamped:
        return ((0, 0, True) if with_flag else (0, 0))
    target = math.log2(sigma / ss.sigma0)
    S = ss.levels_per_octave
    best = (0, 0)
    best_err = abs(target)
    for o in range(ss.n_octaves):
        for l in range(S):
            err = abs(target - (o + l / S))
            if err < best_err - 1e-15:
                best_err = err
                best = (o, l)
    if with_flag:
        return (best[0], best[1], False)
    return best
