"""One-dimensional sampling experiments: warped-template matching energy,
aliasing from scale undersampling, anti-aliasing by averaging, detector
specificity vs descriptor sensitivity, and the pooled-histogram/box-filter
identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import DataError

SUPERSAMPLES = 8


@dataclass(frozen=True)
class Signal1D:
    """Real-valued samples on a regular grid x_i = i * spacing."""

    samples: np.ndarray
    spacing: float = 1.0
    oob_fraction: float = 0.0  # fraction of clamped reads when warped

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise DataError("a signal needs at least 2 samples")
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def grid(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing


@dataclass(frozen=True)
class EnergyRidge:
    """Matching energy over a scale grid, optionally with the full
    (scale, shift) surface it was minimized over."""

    scales: np.ndarray
    energy: np.ndarray
    translations: np.ndarray | None = None
    surface: np.ndarray | None = None  # (n_scales, n_translations)


def _interp_clamped(x: np.ndarray, sig: Signal1D):
    """Linear interpolation with boundary clamp; returns values and the
    fraction of reads outside the domain."""
    grid = sig.grid()
    oob = (x < grid[0]) | (x > grid[-1])
    vals = np.interp(x, grid, sig.samples)
    return vals, float(oob.mean())


def warp(rho: Signal1D, sigma: float, tau: float, n: int | None = None) -> Signal1D:
    """Pixel-cell average of rho((x - tau) / sigma) on the output grid.

    Each output sample is the mean of SUPERSAMPLES midpoint evaluations of
    the linearly interpolated template across the cell of width `spacing`
    centered at x_i, which integrates each linear piece exactly whenever the
    template's breakpoints land on sub-cell boundaries.
    """
    if sigma <= 0:
        raise DataError("warp scale must be positive")
    n = n or rho.n
    eps = rho.spacing
    x = np.arange(n) * eps
    offsets = ((np.arange(SUPERSAMPLES) + 0.5) / SUPERSAMPLES - 0.5) * eps
    pts = (x[:, None] + offsets[None, :] - tau) / sigma
    vals, oob = _interp_clamped(pts.ravel(), rho)
    out = vals.reshape(n, SUPERSAMPLES).mean(axis=1)
    return Signal1D(samples=out, spacing=eps, oob_fraction=oob)


def matching_energy(rho: Signal1D, f: Signal1D, sigma_grid, tau_grid,
                    window: tuple[float, float],
                    norm: str = "l1") -> EnergyRidge:
    """Mean residual between f and the warped template over a window.

    The energy surface E(sigma, tau) is the mean |f - W rho| (or squared
    residual for norm="l2") over samples of f inside [a, b]; the ridge is the
    minimum over tau at each sigma.
    """
    sigma_grid = np.asarray(sigma_grid, dtype=np.float64)
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    if sigma_grid.size == 0 or tau_grid.size == 0:
        raise DataError("scale and shift grids must be nonempty")
    if (sigma_grid <= 0).any():
        raise DataError("scales must be positive")
    a, b = window
    grid = f.grid()
    inside = (grid >= a) & (grid <= b)
    if not inside.any():
        raise DataError("window contains no samples of the target signal")
    x_win = grid[inside]
    f_win = f.samples[inside]
    eps = f.spacing
    offsets = ((np.arange(SUPERSAMPLES) + 0.5) / SUPERSAMPLES - 0.5) * eps
    cells = x_win[:, None] + offsets[None, :]  # (n_win, S)

    surface = np.empty((sigma_grid.size, tau_grid.size))
    for si, sigma in enumerate(sigma_grid):
        pts = (cells[None, :, :] - tau_grid[:, None, None]) / sigma
        vals, _ = _interp_clamped(pts.ravel(), rho)
        warped = vals.reshape(tau_grid.size, x_win.size, SUPERSAMPLES).mean(axis=2)
        resid = f_win[None, :] - warped
        if norm == "l1":
            surface[si] = np.abs(resid).mean(axis=1)
        elif norm == "l2":
            surface[si] = (resid**2).mean(axis=1)
        else:
            raise DataError(f"unknown residual norm {norm!r}")
    return EnergyRidge(
        scales=sigma_grid,
        energy=surface.min(axis=1),
        translations=tau_grid,
        surface=surface,
    )


def _box_smooth(values: np.ndarray, width: int) -> np.ndarray:
    """Box average with renormalized truncation at the boundaries."""
    half_lo = (width - 1) // 2
    half_hi = width // 2
    out = np.empty_like(values)
    n = values.shape[0]
    for i in range(n):
        lo = max(0, i - half_lo)
        hi = min(n, i + half_hi + 1)
        out[i] = values[lo:hi].mean()
    return out


def antialias_ridge(ridge: EnergyRidge, width: int) -> EnergyRidge:
    """Convolve the energy along the scale axis with a normalized box kernel
    of `width` grid steps (width 1 is the identity)."""
    if width < 1:
        raise DataError("kernel width must be at least one grid step")
    energy = _box_smooth(ridge.energy, width)
    surface = None
    if ridge.surface is not None:
        surface = np.stack([_box_smooth(ridge.surface[:, j], width)
                            for j in range(ridge.surface.shape[1])], axis=1)
    return EnergyRidge(scales=ridge.scales, energy=energy,
                       translations=ridge.translations, surface=surface)


def total_variation(values: np.ndarray) -> float:
    return float(np.abs(np.diff(values)).sum())


def valley_width(scales: np.ndarray, energy: np.ndarray,
                 rise: float = 0.10) -> float:
    """Width of the contiguous interval around the argmin where the energy
    stays below min + rise * (max - min)."""
    k = int(np.argmin(energy))
    level = energy.min() + rise * (energy.max() - energy.min())
    lo = k
    while lo > 0 and energy[lo - 1] <= level:
        lo -= 1
    hi = k
    while hi < len(energy) - 1 and energy[hi + 1] <= level:
        hi += 1
    return float(scales[hi] - scales[lo])


def count_local_minima(values: np.ndarray) -> int:
    """Strict interior local minima (plateaus collapse to one)."""
    count = 0
    n = len(values)
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n - 1 and values[j + 1] == values[i]:
            j += 1
        if values[i] < values[i - 1] and values[j] < values[j + 1]:
            count += 1
        i = j + 1
    return count


# ---------------------------------------------------------------------------
# Detector specificity vs descriptor sensitivity
# ---------------------------------------------------------------------------


def _window_descriptor(f: Signal1D, center: float, radius: float,
                       length: int) -> np.ndarray:
    """Identity descriptor: the signal on [center-radius, center+radius],
    resampled to a fixed length."""
    xs = np.linspace(center - radius, center + radius, length)
    vals, _ = _interp_clamped(xs, f)
    return vals


def specificity_curves(rho: Signal1D, f: Signal1D, sigma_grid,
                       center: float, sigma_star: float,
                       descriptor_len: int = 64, dog_k: float = 2 ** (1 / 3)):
    """Difference-of-Gaussians detector response at the planted location and
    the change of the identity descriptor relative to the planted scale, both
    min-max normalized to [0, 1]."""
    sigma_grid = np.asarray(sigma_grid, dtype=np.float64)
    if (sigma_grid <= 0).any():
        raise DataError("scales must be positive")
    idx = center / f.spacing
    i0 = int(np.clip(round(idx), 0, f.n - 1))
    response = np.empty(sigma_grid.size)
    for k, sigma in enumerate(sigma_grid):
        fine = gaussian_filter1d(f.samples, sigma / f.spacing, mode="nearest")
        coarse = gaussian_filter1d(f.samples, dog_k * sigma / f.spacing,
                                   mode="nearest")
        response[k] = abs(coarse[i0] - fine[i0])
    ref = _window_descriptor(f, center, sigma_star, descriptor_len)
    change = np.array([
        np.linalg.norm(_window_descriptor(f, center, s, descriptor_len) - ref)
        for s in sigma_grid
    ])

    def _norm01(v):
        span = v.max() - v.min()
        return (v - v.min()) / span if span > 0 else np.zeros_like(v)

    return _norm01(response), _norm01(change)


def fwhm(xs: np.ndarray, ys: np.ndarray, peak: str = "max") -> float:
    """Full width at half maximum of a peak (or of an inverted well)."""
    v = np.asarray(ys, dtype=np.float64)
    if peak == "min":
        v = v.max() - v
    k = int(np.argmax(v))
    half = v[k] / 2.0
    lo = k
    while lo > 0 and v[lo - 1] >= half:
        lo -= 1
    hi = k
    while hi < len(v) - 1 and v[hi + 1] >= half:
        hi += 1
    return float(xs[hi] - xs[lo])


# ---------------------------------------------------------------------------
# Pooled histogram vs box filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PooledHistogram:
    centers: np.ndarray
    masses: np.ndarray  # sums to 1
    hist_mean: float    # sum of center * mass
    box_mean: float     # exact box-filtered value


def pooled_histogram(f: Signal1D, center: float, radius: float,
                     bins: int) -> PooledHistogram:
    """Histogram of signal values in the neighborhood |x - center| <= radius
    over `bins` equal-width bins; its mean approximates the box filter to
    within half a bin width."""
    if bins < 2:
        raise DataError("need at least 2 bins")
    grid = f.grid()
    inside = np.abs(grid - center) <= radius
    if not inside.any():
        raise DataError("empty pooling neighborhood")
    values = f.samples[inside]
    box_mean = float(values.mean())
    vmin, vmax = float(values.min()), float(values.max())
    if vmax - vmin < 1e-300:
        centers = np.full(bins, vmin)
        masses = np.zeros(bins)
        masses[0] = 1.0
        return PooledHistogram(centers=centers, masses=masses,
                               hist_mean=vmin, box_mean=box_mean)
    counts, edges = np.histogram(values, bins=bins, range=(vmin, vmax))
    centers = 0.5 * (edges[:-1] + edges[1:])
    masses = counts / counts.sum()
    hist_mean = float((centers * masses).sum())
    return PooledHistogram(centers=centers, masses=masses,
                           hist_mean=hist_mean, box_mean=box_mean)
