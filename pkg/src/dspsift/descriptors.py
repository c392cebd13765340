"""Gradient-orientation histogram descriptors.

A single un-normalized cell accumulates gradient magnitude, split bilinearly
over the two nearest orientation bins and separable-bilinearly over the four
nearest spatial cell centers, under a global Gaussian window. SIFT is the
4x4x8 grid of such cells, flattened and normalize/clamp/renormalized.
Domain-size pooling accumulates the *un-normalized* grids of patches
resampled at several domain sizes around the detected one and finalizes once,
which leaves the dimension unchanged. RAW-PATCH and the single-large-size
variant serve as benchmark baselines.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .frames import AffineFrame, Patch, SizeSampling, extract_patch, sample_domain_sizes
from .mser import EllipseRegion
from .scalespace import ScaleSpace, gradients

N_CELLS = 4
N_ORI_BINS = 8
SIFT_DIM = N_CELLS * N_CELLS * N_ORI_BINS
RAW_PATCH_SIZE = 91
DEFAULT_CLAMP = 0.067

KIND_SIFT = "sift"
KIND_DSP = "dsp-sift"
KIND_SIFT_L = "sift-l"
KIND_RAW = "raw-patch"
KIND_BOW = "bow"

# fraction of patch samples allowed to fall outside the pyramid level
MAX_OOB_FRACTION = 0.5


@dataclass(frozen=True)
class Descriptor:
    """Fixed-length nonnegative vector; unit l2 norm unless degenerate
    (l1 for bag-of-words histograms)."""

    values: np.ndarray
    kind: str
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DescriptorConfig:
    patch_base: int = 32
    clamp: float = DEFAULT_CLAMP

    def __post_init__(self):
        if self.patch_base < 8:
            raise DataError("patch_base must be at least 8")
        if not (0 < self.clamp <= 1):
            raise DataError("clamp threshold must be in (0, 1]")


def sift_cells(grad, window_sigma: float | None = None) -> np.ndarray:
    """Un-normalized 4x4x8 histogram grid of one rectified patch.

    Each pixel contributes its gradient magnitude, scaled by a global
    Gaussian window (sigma = half the patch side unless overridden), split
    bilinearly over the two nearest orientation bins and the up-to-four
    nearest spatial cells. Bin centers sit at multiples of 2*pi/8; cell
    centers at (c + 0.5) * side/4 - 0.5.
    """
    size = grad.width
    if grad.height != size:
        raise DataError("cell binning expects a square patch")
    cell = size / N_CELLS
    center = (size - 1) / 2.0
    sigma_w = window_sigma if window_sigma is not None else size / 2.0

    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    window = np.exp(-((xx - center) ** 2 + (yy - center) ** 2) / (2 * sigma_w**2))
    mass = (grad.mag * window).ravel()

    # cell-space coordinates: centers at integers 0..3
    u = ((xx + 0.5) / cell - 0.5).ravel()
    v = ((yy + 0.5) / cell - 0.5).ravel()
    iu = np.floor(u).astype(np.intp)
    iv = np.floor(v).astype(np.intp)
    fu = u - iu
    fv = v - iv

    ori_pos = (grad.ori.ravel() / (2.0 * np.pi / N_ORI_BINS))
    ib = np.floor(ori_pos).astype(np.intp)
    fb = ori_pos - ib
    ib %= N_ORI_BINS

    flat = np.zeros(N_CELLS * N_CELLS * N_ORI_BINS)
    for dv, wv in ((0, 1.0 - fv), (1, fv)):
        rows = iv + dv
        row_ok = (rows >= 0) & (rows < N_CELLS)
        for du, wu in ((0, 1.0 - fu), (1, fu)):
            cols = iu + du
            ok = row_ok & (cols >= 0) & (cols < N_CELLS)
            if not ok.any():
                continue
            base = (rows[ok] * N_CELLS + cols[ok]) * N_ORI_BINS
            spatial = mass[ok] * wv[ok] * wu[ok]
            for db, wb in ((0, 1.0 - fb), (1, fb)):
                bins = (ib[ok] + db) % N_ORI_BINS
                flat += np.bincount(base + bins, weights=spatial * wb[ok],
                                    minlength=flat.size)
    return flat.reshape(N_CELLS, N_CELLS, N_ORI_BINS)


def finalize_stages(vec: np.ndarray, clamp: float = DEFAULT_CLAMP):
    """(normalized, clamped, renormalized) stages of descriptor finalization."""
    norm = np.linalg.norm(vec)
    if norm <= 0:
        raise DataError("cannot finalize an all-zero histogram")
    v1 = vec / norm
    v2 = np.minimum(v1, clamp)
    v3 = v2 / np.linalg.norm(v2)
    return v1, v2, v3


def finalize(cells: np.ndarray, clamp: float = DEFAULT_CLAMP,
             kind: str = KIND_SIFT) -> Descriptor:
    """Flatten (cell-row, cell-col, orientation), l2-normalize, clamp,
    renormalize. All-zero grids yield the degenerate uniform descriptor."""
    vec = np.asarray(cells, dtype=np.float64).reshape(-1)
    if np.linalg.norm(vec) <= 0:
        uniform = np.full(vec.shape[0], 1.0 / np.sqrt(vec.shape[0]))
        return Descriptor(values=uniform, kind=kind, degenerate=True)
    _, _, out = finalize_stages(vec, clamp)
    return Descriptor(values=out, kind=kind)


def _degenerate(kind: str, dim: int = SIFT_DIM) -> Descriptor:
    return Descriptor(values=np.full(dim, 1.0 / np.sqrt(dim)), kind=kind,
                      degenerate=True)


def _cells_for_size(ss: ScaleSpace, frame: AffineFrame, size_sample: float,
                    cfg: DescriptorConfig):
    """Cell grid of one domain-size sample, or None when the patch is mostly
    outside the pyramid level."""
    patch = extract_patch(ss, frame, size_sample, cfg.patch_base)
    if patch.oob_fraction > MAX_OOB_FRACTION:
        return None
    return sift_cells(gradients(patch.data))


def sift_descriptor(ss: ScaleSpace, frame: AffineFrame,
                    cfg: DescriptorConfig | None = None) -> Descriptor:
    """Single-size descriptor at the detected scale."""
    cfg = cfg or DescriptorConfig()
    cells = _cells_for_size(ss, frame, frame.sigma_hat, cfg)
    if cells is None:
        return _degenerate(KIND_SIFT)
    return finalize(cells, cfg.clamp, KIND_SIFT)


def dsp_sift_descriptor(ss: ScaleSpace, frame: AffineFrame,
                        sampling: SizeSampling | None = None,
                        cfg: DescriptorConfig | None = None) -> Descriptor:
    """Pool un-normalized cell grids across domain sizes, then finalize once.

    Accumulation uses compensated (Kahan) summation so the result is the
    exact weighted sum regardless of sample order. A descriptor is rejected
    when more than half its size samples fall outside the image.
    """
    cfg = cfg or DescriptorConfig()
    sampling = sampling or SizeSampling()
    sizes = sample_domain_sizes(frame.sigma_hat, sampling)
    acc = np.zeros((N_CELLS, N_CELLS, N_ORI_BINS))
    comp = np.zeros_like(acc)
    rejected = 0
    for size_k, weight_k in sizes:
        cells = _cells_for_size(ss, frame, size_k, cfg)
        if cells is None:
            rejected += 1
            continue
        term = weight_k * cells - comp
        total = acc + term
        comp = (total - acc) - term
        acc = total
    if rejected > len(sizes) / 2:
        return _degenerate(KIND_DSP)
    return finalize(acc, cfg.clamp, KIND_DSP)


def sift_l_descriptor(ss: ScaleSpace, frame: AffineFrame,
                      lambda2: float = 4.0 / 3.0,
                      cfg: DescriptorConfig | None = None) -> Descriptor:
    """Single-size descriptor at the largest pooled size, lambda2*sigma_hat."""
    cfg = cfg or DescriptorConfig()
    cells = _cells_for_size(ss, frame, lambda2 * frame.sigma_hat, cfg)
    if cells is None:
        return _degenerate(KIND_SIFT_L)
    return finalize(cells, cfg.clamp, KIND_SIFT_L)


def raw_patch_descriptor(ss: ScaleSpace, frame: AffineFrame,
                         patch_size: int = RAW_PATCH_SIZE) -> Descriptor:
    """Unit-norm grayscale intensities of the rectified patch (91x91)."""
    patch = extract_patch(ss, frame, frame.sigma_hat, patch_size)
    dim = patch_size * patch_size
    if patch.oob_fraction > MAX_OOB_FRACTION:
        return _degenerate(KIND_RAW, dim)
    vec = patch.data.reshape(-1).astype(np.float64)
    norm = np.linalg.norm(vec)
    if norm <= 0:
        return _degenerate(KIND_RAW, dim)
    return Descriptor(values=vec / norm, kind=KIND_RAW)


# ---------------------------------------------------------------------------
# Descriptor dumps: text and little-endian binary
# ---------------------------------------------------------------------------

_MAGIC = b"DSPD"


def write_descriptors_text(path, regions: list[EllipseRegion],
                           descriptors: list[Descriptor]) -> None:
    """One record per line: "u v a b c kind dim v1..vdim"."""
    if len(regions) != len(descriptors):
        raise DataError("regions and descriptors must align")
    with open(path, "w") as fh:
        for r, d in zip(regions, descriptors):
            head = f"{r.cx:.9g} {r.cy:.9g} {r.a:.9g} {r.b:.9g} {r.c:.9g}"
            vals = " ".join(f"{v:.9g}" for v in d.values)
            fh.write(f"{head} {d.kind} {d.dim} {vals}\n")


def load_descriptors_text(path):
    regions: list[EllipseRegion] = []
    descriptors: list[Descriptor] = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) < 7:
            raise DataError(f"{path}: truncated record on line {ln}")
        u, v, a, b, c = (float(p) for p in parts[:5])
        kind = parts[5]
        dim = int(parts[6])
        if len(parts) != 7 + dim:
            raise DataError(
                f"{path}: line {ln} declares dim {dim} but has {len(parts) - 7} values"
            )
        values = np.array([float(p) for p in parts[7:]], dtype=np.float64)
        regions.append(EllipseRegion(cx=u, cy=v, a=a, b=b, c=c))
        descriptors.append(Descriptor(values=values, kind=kind))
    return regions, descriptors


def write_descriptors_binary(path, regions: list[EllipseRegion],
                             descriptors: list[Descriptor]) -> None:
    """Little-endian dump: magic "DSPD", u32 count, then per record the five
    f32 region coefficients, u32 dim and dim f32 values. The method name is
    deliberately not serialized so that numerically identical descriptors
    produce identical bytes."""
    if len(regions) != len(descriptors):
        raise DataError("regions and descriptors must align")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(regions)))
        for r, d in zip(regions, descriptors):
            fh.write(struct.pack("<5f", r.cx, r.cy, r.a, r.b, r.c))
            fh.write(struct.pack("<I", d.dim))
            fh.write(d.values.astype("<f4").tobytes())


def load_descriptors_binary(path, kind: str = "unknown"):
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r}")
    (count,) = struct.unpack_from("<I", blob, 4)
    pos = 8
    regions: list[EllipseRegion] = []
    descriptors: list[Descriptor] = []
    for i in range(count):
        if pos + 24 > len(blob):
            raise DataError(f"{path}: truncated at record {i} (byte {pos})")
        u, v, a, b, c = struct.unpack_from("<5f", blob, pos)
        (dim,) = struct.unpack_from("<I", blob, pos + 20)
        pos += 24
        if pos + 4 * dim > len(blob):
            raise DataError(f"{path}: truncated at record {i} (byte {pos})")
        values = np.frombuffer(blob, dtype="<f4", count=dim, offset=pos)
        pos += 4 * dim
        regions.append(EllipseRegion(cx=u, cy=v, a=a, b=b, c=c))
        descriptors.append(
            Descriptor(values=values.astype(np.float64), kind=kind)
        )
    return regions, descriptors
