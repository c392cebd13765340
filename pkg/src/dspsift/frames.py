"""Measurement frames: affine rectification, dominant orientation, domain-size
sampling, and patch extraction from the pyramid octave matching a region size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .mser import EllipseRegion
from .scalespace import ScaleSpace, gradients, octave_for_scale

DEFAULT_PATCH_BASE = 32
DEFAULT_DILATION = 3.0
ORI_BINS = 36


@dataclass(frozen=True)
class AffineFrame:
    """Affine measurement frame of one region.

    A maps the unit circle to the dilated, orientation-aligned measurement
    ellipse in original-image pixels; t is the center; theta the dominant
    orientation; sigma_hat = sqrt(det A) / ref_radius is the detected scale
    in units of the descriptor patch radius (ref_radius = patch_base / 2).
    """

    A: np.ndarray  # (2, 2), det > 0
    t: np.ndarray  # (2,) center (x, y)
    theta: float
    sigma_hat: float
    ref_radius: float
    ori_degenerate: bool = False


@dataclass(frozen=True)
class Patch:
    """Square resampled patch; data holds intensities in [0, 1]."""

    data: np.ndarray  # (size, size)
    source_sigma: float
    oob_fraction: float = 0.0
    scale_clamped: bool = False

    @property
    def size(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class SizeSampling:
    """Domain-size sampling plan: N sizes in (lambda1, lambda2) * sigma_hat."""

    lambda1: float = 1.0 / 6.0
    lambda2: float = 4.0 / 3.0
    n: int = 15
    weights: tuple[float, ...] | None = None  # None -> uniform
    spacing: str = "linear"  # or "geometric"

    def __post_init__(self):
        if not (0 < self.lambda1 <= self.lambda2):
            raise DataError("need 0 < lambda1 <= lambda2")
        if self.n < 1:
            raise DataError("sample count must be >= 1")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if len(w) != self.n or (w < 0).any() or not np.isclose(w.sum(), 1.0):
                raise DataError("weights must be N nonnegative values summing to 1")
        if self.spacing not in ("linear", "geometric"):
            raise DataError(f"unknown spacing {self.spacing!r}")


def sample_domain_sizes(sigma_hat: float, s: SizeSampling) -> list[tuple[float, float]]:
    """(size, weight) samples; N=1 collapses to sigma_hat clamped into range."""
    if sigma_hat <= 0:
        raise DataError("sigma_hat must be positive")
    lo = s.lambda1 * sigma_hat
    hi = s.lambda2 * sigma_hat
    if s.n == 1:
        sizes = np.array([min(max(sigma_hat, lo), hi)])
    elif s.spacing == "linear":
        sizes = lo + np.arange(s.n) / (s.n - 1) * (hi - lo)
    else:
        sizes = np.exp(np.linspace(math.log(lo), math.log(hi), s.n))
    if s.weights is None:
        weights = np.full(s.n, 1.0 / s.n)
    else:
        weights = np.asarray(s.weights, dtype=np.float64)
    return list(zip(sizes.tolist(), weights.tolist()))


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _sym_sqrt_inv(shape_matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root of the inverse of a 2x2 SPD matrix."""
    w, v = np.linalg.eigh(shape_matrix)
    if (w <= 0).any():
        raise DataError("ellipse shape matrix is not positive definite")
    return (v * (1.0 / np.sqrt(w))) @ v.T


def _bilinear(level: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Sample with border clamp; returns (values, out-of-bounds mask)."""
    h, w = level.shape
    oob = (xs < 0) | (xs > w - 1) | (ys < 0) | (ys > h - 1)
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    v00 = level[y0, x0]
    v01 = level[y0, x1]
    v10 = level[y1, x0]
    v11 = level[y1, x1]
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy, oob


def _patch_grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalized patch coordinates: the inscribed circle is the unit circle."""
    half = size / 2.0
    coords = (np.arange(size) - (size - 1) / 2.0) / half
    return np.meshgrid(coords, coords)  # (nx, ny)


def _sample_affine(level: np.ndarray, matrix: np.ndarray, center: np.ndarray,
                   size: int):
    nx, ny = _patch_grid(size)
    xs = center[0] + matrix[0, 0] * nx + matrix[0, 1] * ny
    ys = center[1] + matrix[1, 0] * nx + matrix[1, 1] * ny
    values, oob = _bilinear(level, xs, ys)
    return values, float(oob.mean())


def dominant_orientation(patch: Patch) -> tuple[float, bool]:
    """Magnitude-weighted 36-bin orientation histogram vote.

    Gradients are weighted by a Gaussian window (sigma = size/4), the
    histogram is smoothed twice with a circular [1,4,6,4,1]/16 kernel, and the
    winning bin is refined by parabolic interpolation. A zero-gradient patch
    returns (0.0, True).
    """
    size = patch.size
    if size < 8:
        raise DataError("orientation estimation needs a patch of at least 8x8")
    g = gradients(patch.data)
    center = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    sigma_w = size / 4.0
    window = np.exp(-((xx - center) ** 2 + (yy - center) ** 2) / (2 * sigma_w**2))
    weights = g.mag * window
    if weights.sum() <= 1e-12:
        return 0.0, True
    bin_width = 2.0 * np.pi / ORI_BINS
    bins = np.floor(g.ori / bin_width).astype(int) % ORI_BINS
    hist = np.bincount(bins.ravel(), weights=weights.ravel(), minlength=ORI_BINS)
    kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    for _ in range(2):
        padded = np.concatenate([hist[-2:], hist, hist[:2]])
        hist = np.convolve(padded, kernel, mode="valid")
    k = int(np.argmax(hist))
    h_l = hist[(k - 1) % ORI_BINS]
    h_c = hist[k]
    h_r = hist[(k + 1) % ORI_BINS]
    denom = h_l - 2 * h_c + h_r
    shift = 0.0 if abs(denom) < 1e-12 else 0.5 * (h_l - h_r) / denom
    theta = ((k + 0.5 + shift) * bin_width) % (2.0 * np.pi)
    return float(theta), False


def frame_from_region(
    region: EllipseRegion,
    img,
    dilation: float = DEFAULT_DILATION,
    patch_base: int = DEFAULT_PATCH_BASE,
    assign_orientation: bool = True,
) -> AffineFrame:
    """Build the rectifying frame of a region: dilate, align, set the scale.

    The orientation is estimated once, on the un-rotated rectified patch
    sampled from the source image, and baked into A so every later domain
    size reuses it.
    """
    pixels = img.pixels if hasattr(img, "pixels") else np.asarray(img)
    h, w = pixels.shape
    a0 = dilation * _sym_sqrt_inv(region.shape_matrix)
    t = np.array([region.cx, region.cy], dtype=np.float64)
    # reject ellipses entirely outside the raster
    reach_x = dilation * np.sqrt(region.c / (region.a * region.c - region.b**2))
    reach_y = dilation * np.sqrt(region.a / (region.a * region.c - region.b**2))
    if (t[0] + reach_x < 0 or t[0] - reach_x > w - 1
            or t[1] + reach_y < 0 or t[1] - reach_y > h - 1):
        raise DataError("dilated ellipse lies entirely outside the image")
    theta, degenerate = 0.0, False
    if assign_orientation:
        values, oob = _sample_affine(pixels, a0, t, patch_base)
        theta, degenerate = dominant_orientation(
            Patch(data=values, source_sigma=0.0, oob_fraction=oob)
        )
    a_mat = a0 @ _rotation(theta)
    ref_radius = patch_base / 2.0
    sigma_hat = math.sqrt(np.linalg.det(a_mat)) / ref_radius
    return AffineFrame(
        A=a_mat,
        t=t,
        theta=theta,
        sigma_hat=sigma_hat,
        ref_radius=ref_radius,
        ori_degenerate=degenerate,
    )


def extract_patch(
    ss: ScaleSpace,
    frame: AffineFrame,
    size_sample: float,
    out_size: int | None = None,
) -> Patch:
    """Resample the measurement region of one domain size into a square patch.

    The absolute region radius rho = size_sample * ref_radius picks the
    pyramid level whose downsampling maps rho closest to out_size/2 in log
    space; the level is then sampled bilinearly under the frame's affine map.
    """
    if size_sample <= 0:
        raise DataError("domain size must be positive")
    out_size = int(out_size or round(2 * frame.ref_radius))
    if out_size < 8:
        raise DataError("patch size must be at least 8")
    rho = size_sample * frame.ref_radius
    target_rel = rho / (out_size / 2.0)
    o, l, clamped = octave_for_scale(ss.sigma0 * target_rel, ss, with_flag=True)
    level = ss.level(o, l)
    scale = 2.0**o
    matrix = frame.A * (size_sample / frame.sigma_hat / scale)
    center = frame.t / scale
    values, oob = _sample_affine(level, matrix, center, out_size)
    return Patch(
        data=np.clip(values, 0.0, 1.0),
        source_sigma=ss.sigma(o, l),
        oob_fraction=oob,
        scale_clamped=clamped,
    )
