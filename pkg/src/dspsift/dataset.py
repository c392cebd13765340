"""Benchmark ingestion: images, ground-truth homographies and region files.

Reads sequences in the Oxford layout (img1..imgK plus H1toJp files), PGM/PPM
rasters in all four PNM flavors, PNG via Pillow, and the Oxford affine-region
text format. All loaders are pure functions of file content; the returned
values are treated as immutable.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError
from .mser import EllipseRegion

# BT.601 luma weights; the color->gray convention is fixed here once.
_LUMA = (0.299, 0.587, 0.114)

_IMAGE_EXTS = (".pgm", ".ppm", ".pnm", ".png")


@dataclass(frozen=True)
class GrayImage:
    """Single-channel intensity raster with values in [0, 1]."""

    pixels: np.ndarray  # (height, width) float64

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DataError(f"image must be a 2D raster, got shape {px.shape}")
        if px.min() < -1e-12 or px.max() > 1 + 1e-12:
            raise DataError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Homography:
    """3x3 invertible map between homogeneous pixel coordinates of a pair."""

    h: np.ndarray  # (3, 3) float64, h[2,2] == 1 when nonzero

    def __post_init__(self):
        m = np.asarray(self.h, dtype=np.float64)
        if m.shape != (3, 3):
            raise DataError(f"homography must be 3x3, got {m.shape}")
        if abs(np.linalg.det(m)) < 1e-12:
            raise DataError("homography is singular")
        if m[2, 2] != 0:
            m = m / m[2, 2]
        object.__setattr__(self, "h", m)

    def apply(self, xy: np.ndarray) -> np.ndarray:
        """Map (n, 2) pixel coordinates through the homography."""
        pts = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        ones = np.ones((pts.shape[0], 1))
        hom = np.hstack([pts, ones]) @ self.h.T
        return hom[:, :2] / hom[:, 2:3]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h))


@dataclass(frozen=True)
class Sequence:
    """Ordered image list (reference first) with reference->target homographies.

    Pair (1, j) is at transform-magnitude position j-1 in the sequence.
    """

    name: str
    images: list[GrayImage]
    homographies: dict[int, Homography]  # 1-based target index j -> H(img1 -> imgj)
    region_files: dict[int, Path] = field(default_factory=dict)

    def pairs(self):
        """Yield (target_index, homography) for every evaluation pair."""
        for j in sorted(self.homographies):
            yield j, self.homographies[j]


# ---------------------------------------------------------------------------
# PNM / PNG readers
# ---------------------------------------------------------------------------


class _PnmScanner:
    """Token scanner for PNM headers that reports byte offsets on error."""

    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def _skip_space(self):
        blob, n = self.blob, len(self.blob)
        while self.pos < n:
            c = blob[self.pos]
            if c in b" \t\r\n\x0b\x0c":
                self.pos += 1
            elif c == ord("#"):
                nl = blob.find(b"\n", self.pos)
                self.pos = n if nl < 0 else nl + 1
            else:
                return

    def token(self) -> bytes:
        self._skip_space()
        start = self.pos
        blob, n = self.blob, len(self.blob)
        while self.pos < n and blob[self.pos] not in b" \t\r\n\x0b\x0c#":
            self.pos += 1
        if self.pos == start:
            raise DataError(f"{self.path}: truncated header at byte {start}")
        return blob[start:self.pos]

    def int_token(self, what: str) -> int:
        start = self.pos
        tok = self.token()
        try:
            return int(tok)
        except ValueError:
            raise DataError(
                f"{self.path}: bad {what} {tok!r} at byte {start}"
            ) from None


def _read_pnm(blob: bytes, path) -> np.ndarray:
    """Decode P2/P3/P5/P6 into a float array in [0,1], (H,W) or (H,W,3)."""
    sc = _PnmScanner(blob, path)
    magic = sc.token()
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise DataError(f"{path}: unsupported PNM magic {magic!r} at byte 0")
    channels = 3 if magic in (b"P3", b"P6") else 1
    width = sc.int_token("width")
    height = sc.int_token("height")
    maxval = sc.int_token("maxval")
    if width < 1 or height < 1:
        raise DataError(f"{path}: bad dimensions {width}x{height}")
    if maxval <= 0:
        raise DataError(f"{path}: bad maxval {maxval}")
    if maxval > 65535:
        raise DataError(f"{path}: unsupported bit depth (maxval {maxval} > 16 bit)")

    count = width * height * channels
    if magic in (b"P2", b"P3"):
        values = np.empty(count, dtype=np.float64)
        for i in range(count):
            v = sc.int_token(f"sample {i}")
            if v < 0 or v > maxval:
                raise DataError(f"{path}: sample {i} out of range (value {v})")
            values[i] = v
    else:
        if sc.pos >= len(blob) or blob[sc.pos] not in b" \t\r\n\x0b\x0c":
            raise DataError(f"{path}: missing raster separator at byte {sc.pos}")
        start = sc.pos + 1
        itemsize = 2 if maxval > 255 else 1
        need = count * itemsize
        if len(blob) - start < need:
            raise DataError(
                f"{path}: raster truncated at byte {len(blob)} (need {start + need})"
            )
        dtype = ">u2" if itemsize == 2 else np.uint8
        values = np.frombuffer(blob, dtype=dtype, count=count, offset=start)
        values = values.astype(np.float64)

    values /= float(maxval)
    if channels == 1:
        return values.reshape(height, width)
    return values.reshape(height, width, 3)


def _read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        mode = im.mode
        if mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if mode in ("I", "I;16", "I;16B", "I;16L"):
            arr = np.asarray(im, dtype=np.float64)
            return np.clip(arr / 65535.0, 0.0, 1.0)
        rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
        return rgb / 255.0


def load_image(path) -> GrayImage:
    """Load a PGM/PPM/PNG file as a grayscale image scaled to [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    blob = path.read_bytes()
    if blob[:2] in (b"P2", b"P3", b"P5", b"P6"):
        arr = _read_pnm(blob, path)
    elif blob[:8] == b"\x89PNG\r\n\x1a\n":
        arr = _read_png(path)
    elif blob[:2] in (b"P1", b"P4"):
        raise DataError(f"{path}: PBM bitmaps are not supported")
    else:
        raise DataError(f"{path}: unrecognized image format at byte 0")
    if arr.ndim == 3:
        arr = arr @ np.array(_LUMA)
    return GrayImage(np.clip(arr, 0.0, 1.0))


def write_pgm(img: GrayImage, path, maxval: int = 65535) -> None:
    """Write a binary P5 file; maxval 65535 keeps 16-bit round-trip accuracy."""
    if not (0 < maxval <= 65535):
        raise DataError(f"maxval {maxval} outside (0, 65535]")
    q = np.rint(img.pixels * maxval).astype(np.uint32)
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode()
    if maxval > 255:
        payload = q.astype(">u2").tobytes()
    else:
        payload = q.astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


# ---------------------------------------------------------------------------
# Homography files (Oxford H1toJp: 9 whitespace-separated reals, row-major)
# ---------------------------------------------------------------------------


def load_homography(path) -> Homography:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    tokens = path.read_text().split()
    if len(tokens) != 9:
        raise DataError(f"{path}: expected 9 numbers, got {len(tokens)}")
    try:
        vals = [float(t) for t in tokens]
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    m = np.array(vals, dtype=np.float64).reshape(3, 3)
    if abs(np.linalg.det(m)) < 1e-12:
        raise DataError(f"{path}: homography is singular")
    return Homography(m)


def write_homography(hmg: Homography, path) -> None:
    rows = "\n".join(" ".join(f"{v:.12g}" for v in row) for row in hmg.h)
    Path(path).write_text(rows + "\n")


# ---------------------------------------------------------------------------
# Oxford affine-region files
# ---------------------------------------------------------------------------


def load_regions(path) -> list[EllipseRegion]:
    """Read an Oxford region file: "1.0", count, then "u v a b c" lines.

    Non-positive-definite entries are skipped with a warning so that
    (returned + skipped) always equals the declared count.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise DataError(f"{path}: missing region-file header")
    try:
        float(lines[0])
        count = int(float(lines[1]))
    except ValueError:
        raise DataError(f"{path}: malformed region-file header") from None
    data_lines = lines[2:]
    if len(data_lines) != count:
        raise DataError(
            f"{path}: declared {count} regions but found {len(data_lines)}"
        )
    regions: list[EllipseRegion] = []
    for i, line in enumerate(data_lines):
        parts = line.split()
        if len(parts) != 5:
            raise DataError(f"{path}: region line {i + 3} has {len(parts)} fields")
        u, v, a, b, c = (float(p) for p in parts)
        if a <= 0 or c <= 0 or a * c - b * b <= 0:
            warnings.warn(
                f"{path}: skipping non-positive-definite region on line {i + 3}",
                stacklevel=2,
            )
            continue
        regions.append(EllipseRegion(cx=u, cy=v, a=a, b=b, c=c))
    return regions


def write_regions(regions: list[EllipseRegion], path) -> None:
    with open(path, "w") as fh:
        fh.write("1.0\n")
        fh.write(f"{len(regions)}\n")
        for r in regions:
            fh.write(f"{r.cx:.9g} {r.cy:.9g} {r.a:.9g} {r.b:.9g} {r.c:.9g}\n")


# ---------------------------------------------------------------------------
# Sequences
# ---------------------------------------------------------------------------


def _find_image(directory: Path, index: int) -> Path | None:
    for ext in _IMAGE_EXTS:
        p = directory / f"img{index}{ext}"
        if p.is_file():
            return p
    return None


def load_sequence(directory) -> Sequence:
    """Load img1..imgK and the H1toJp files from one sequence directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: no such directory")
    if _find_image(directory, 1) is None:
        raise DataError(f"{directory}: missing reference image img1")
    images = []
    homographies: dict[int, Homography] = {}
    region_files: dict[int, Path] = {}
    index = 1
    while True:
        img_path = _find_image(directory, index)
        if img_path is None:
            break
        images.append(load_image(img_path))
        regions = img_path.with_suffix(img_path.suffix + ".regions")
        if regions.is_file():
            region_files[index] = regions
        if index >= 2:
            h_path = directory / f"H1to{index}p"
            if not h_path.is_file():
                raise DataError(f"{directory}: missing homography file H1to{index}p")
            homographies[index] = load_homography(h_path)
        index += 1
    return Sequence(
        name=directory.name,
        images=images,
        homographies=homographies,
        region_files=region_files,
    )


def discover_sequences(root) -> list[Path]:
    """Sequence directories under a dataset root (any dir containing img1.*)."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"{root}: no such directory")
    if _find_image(root, 1) is not None:
        return [root]
    found = sorted(
        d for d in root.iterdir() if d.is_dir() and _find_image(d, 1) is not None
    )
    if not found:
        raise DataError(f"{root}: no Oxford-layout sequences found")
    return found
