"""Seeded synthetic sequences in the Oxford layout, for smoke tests and for
exercising the benchmark where no real dataset is available.

The texture mixes rotated rectangles, strokes, and ramped ellipses drawn from
a small palette (so similar-looking distractors exist), over a smooth
background with a fine detail layer. Shapes have corners and edges, which
keeps dominant-orientation estimates stable across views; the target images
add defocus and sensor noise so detected region extents jitter between views
the way they do on natural images.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .dataset import GrayImage, Homography, write_homography, write_pgm


def make_texture(height: int = 240, width: int = 320, seed: int = 0,
                 n_shapes: int = 150) -> GrayImage:
    """Shape-and-noise scene with extremal structure at several sizes."""
    rng = np.random.default_rng(seed)
    bg = gaussian_filter(rng.standard_normal((height, width)), 10.0)
    img = 0.5 + 0.1 * bg / max(bg.std(), 1e-9)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    for _ in range(n_shapes):
        cx = rng.uniform(8, width - 8)
        cy = rng.uniform(8, height - 8)
        phi = rng.uniform(0, np.pi)
        c, s = math.cos(phi), math.sin(phi)
        dx = (xx - cx) * c + (yy - cy) * s
        dy = -(xx - cx) * s + (yy - cy) * c
        kind = rng.integers(3)
        if kind == 0:  # rotated rectangle
            r1 = rng.uniform(2.5, 14.0)
            r2 = rng.uniform(2.0, 9.0)
            mask = (np.abs(dx) <= r1) & (np.abs(dy) <= r2)
        elif kind == 1:  # ellipse with an intensity ramp along its major axis
            r1 = rng.uniform(2.5, 12.0)
            r2 = r1 * rng.uniform(0.55, 1.0)
            mask = (dx / r1) ** 2 + (dy / r2) ** 2 <= 1.0
        else:  # stroke
            r1 = rng.uniform(6.0, 18.0)
            r2 = rng.uniform(1.2, 2.5)
            mask = (np.abs(dx) <= r1) & (np.abs(dy) <= r2)
        value = rng.uniform(0.05, 0.95)
        if kind == 1 and mask.any():
            ramp = 0.25 * dx / max(1.0, np.abs(dx[mask]).max())
            img = np.where(mask, np.clip(value + ramp, 0, 1), img)
        else:
            img = np.where(mask, np.clip(value, 0, 1), img)
    detail = gaussian_filter(rng.standard_normal((height, width)), 1.2)
    img = img + 0.06 * detail / max(detail.std(), 1e-9)
    img = gaussian_filter(img, 0.7)
    return GrayImage(np.clip(img, 0.0, 1.0))


def warp_image(img: GrayImage, hmg: Homography,
               out_shape: tuple[int, int] | None = None,
               fill: float = 0.5) -> GrayImage:
    """Render img under the reference->target homography (inverse mapping)."""
    h, w = out_shape or img.pixels.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    src = hmg.inverse().apply(pts)
    sx = src[:, 0].reshape(h, w)
    sy = src[:, 1].reshape(h, w)
    ih, iw = img.pixels.shape
    inside = (sx >= 0) & (sx <= iw - 1) & (sy >= 0) & (sy <= ih - 1)
    x = np.clip(sx, 0, iw - 1)
    y = np.clip(sy, 0, ih - 1)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, iw - 1)
    y1 = np.minimum(y0 + 1, ih - 1)
    fx = x - x0
    fy = y - y0
    px = img.pixels
    top = px[y0, x0] * (1 - fx) + px[y0, x1] * fx
    bot = px[y1, x0] * (1 - fx) + px[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    out = np.where(inside, out, fill)
    return GrayImage(np.clip(out, 0.0, 1.0))


def similarity_about(cx: float, cy: float, scale: float,
                     angle: float) -> Homography:
    c, s = scale * math.cos(angle), scale * math.sin(angle)
    to_origin = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1.0]])
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
    back = np.array([[1, 0, cx], [0, 1, cy], [0, 0, 1.0]])
    return Homography(back @ rot @ to_origin)


def tilt_about(cx: float, cy: float, shear: float, perspective: float,
               scale: float = 1.0) -> Homography:
    to_origin = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1.0]])
    core = np.array([
        [scale, shear, 0.0],
        [0.0, scale * (1.0 - shear / 2), 0.0],
        [perspective, perspective / 2, 1.0],
    ])
    back = np.array([[1, 0, cx], [0, 1, cy], [0, 0, 1.0]])
    return Homography(back @ core @ to_origin)


def _degraded(img: GrayImage, rng, blur: float, noise: float) -> GrayImage:
    px = img.pixels
    if blur > 0:
        px = gaussian_filter(px, blur)
    px = px + rng.normal(0.0, noise, size=px.shape)
    return GrayImage(np.clip(px, 0.0, 1.0))


def make_benchmark(root, seed: int = 7, height: int = 240,
                   width: int = 320, n_targets: int = 3) -> list[Path]:
    """Write three sequences (zoom, tilt, blur) of 1 + n_targets images each,
    with H1toJp ground truth, and return the sequence directories."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    cx, cy = width / 2.0, height / 2.0
    dirs = []

    def _write(seq_dir: Path, images, homs):
        seq_dir.mkdir(parents=True, exist_ok=True)
        for idx, im in enumerate(images, start=1):
            write_pgm(im, seq_dir / f"img{idx}.pgm", maxval=255)
        for j, hm in homs.items():
            write_homography(hm, seq_dir / f"H1to{j}p")
        dirs.append(seq_dir)

    # zoom + rotation: scale change drives octave mismatch between views
    ref = make_texture(height, width, seed=seed)
    images = [_degraded(ref, rng, 0.0, 0.01)]
    homs = {}
    for k in range(1, n_targets + 1):
        zoom = 1.0 + 0.3 * k
        angle = math.radians(7.0 * k)
        hm = similarity_about(cx, cy, zoom, angle)
        images.append(_degraded(warp_image(ref, hm), rng, 1.3, 0.022))
        homs[k + 1] = hm
    _write(root / "zoom", images, homs)

    # viewpoint tilt: shear plus a perspective term
    ref = make_texture(height, width, seed=seed + 1)
    images = [_degraded(ref, rng, 0.0, 0.01)]
    homs = {}
    for k in range(1, n_targets + 1):
        hm = tilt_about(cx, cy, shear=0.14 * k, perspective=2.4e-4 * k,
                        scale=1.0 + 0.08 * k)
        images.append(_degraded(warp_image(ref, hm), rng, 1.3, 0.022))
        homs[k + 1] = hm
    _write(root / "tilt", images, homs)

    # blur: identity geometry, increasing defocus inflates detected extents
    ref = make_texture(height, width, seed=seed + 2)
    images = [_degraded(ref, rng, 0.0, 0.01)]
    homs = {}
    for k in range(1, n_targets + 1):
        images.append(_degraded(ref, rng, 1.0 + 1.0 * k, 0.022))
        homs[k + 1] = Homography(np.eye(3))
    _write(root / "blur", images, homs)

    return dirs
