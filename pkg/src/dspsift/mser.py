"""Maximally stable extremal regions via a union-find component tree.

Pixels are flooded in increasing gray order (256 quantized levels), components
are merged with union-by-size, and every component identity ("branch") keeps a
per-level history of its area and raw moments. Stability of a branch at level
l is |area(l+delta) - area(l-delta)| / area(l); local minima below the
max_variation threshold become candidate regions, deduplicated along nesting
chains by min_diversity. Both polarities are scanned so bright-on-dark and
dark-on-bright regions are treated symmetrically.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import DataError

_CLOSE_SENTINEL = 256  # branches still open after the last gray level


@dataclass(frozen=True)
class EllipseRegion:
    """Covariant region: center plus positive-definite ellipse coefficients.

    The boundary is a(x-cx)^2 + 2b(x-cx)(y-cy) + c(y-cy)^2 = 1 in pixel
    coordinates (x rightward, y downward, 0-based). `area` is the pixel count
    of the source extremal region, 0 for synthetic regions.
    """

    cx: float
    cy: float
    a: float
    b: float
    c: float
    area: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.c > 0 and self.a * self.c - self.b**2 > 0):
            raise DataError(
                f"ellipse coefficients not positive definite: "
                f"a={self.a} b={self.b} c={self.c}"
            )

    @property
    def shape_matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]], dtype=np.float64)

    @property
    def ellipse_area(self) -> float:
        return float(np.pi / np.sqrt(self.a * self.c - self.b**2))

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the ellipse."""
        det = self.a * self.c - self.b**2
        dx = np.sqrt(self.c / det)
        dy = np.sqrt(self.a / det)
        return self.cx - dx, self.cy - dy, self.cx + dx, self.cy + dy


@dataclass(frozen=True)
class MserParams:
    delta: int = 5
    min_area: int = 30
    max_area: int | None = None  # None -> 1% of the image area
    max_variation: float = 0.25
    min_diversity: float = 0.2

    def __post_init__(self):
        if self.delta < 1:
            raise DataError(f"delta must be >= 1, got {self.delta}")
        if self.min_area <= 0:
            raise DataError(f"min_area must be positive, got {self.min_area}")
        if self.max_area is not None and self.max_area <= self.min_area:
            raise DataError("max_area must exceed min_area")
        if not (0 < self.max_variation <= 1):
            raise DataError("max_variation must be in (0, 1]")
        if not (0 < self.min_diversity <= 1):
            raise DataError("min_diversity must be in (0, 1]")


def ellipse_from_moments(pixels) -> EllipseRegion:
    """Fit the ellipse with the same second moments as a pixel set.

    A uniform ellipse with semi-axis s has variance s^2/4 along that axis, so
    the fitted semi-axes are 2*sqrt(eigenvalues of the pixel covariance).
    """
    pts = np.asarray(list(pixels), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise DataError("need at least 3 pixels to fit an ellipse")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / pts.shape[0]
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    if det <= 1e-12:
        raise DataError("degenerate (collinear) pixel set")
    shape = np.linalg.inv(4.0 * cov)
    return EllipseRegion(
        cx=float(mean[0]),
        cy=float(mean[1]),
        a=float(shape[0, 0]),
        b=float(shape[0, 1]),
        c=float(shape[1, 1]),
        area=float(pts.shape[0]),
    )


class _Branch:
    """History of one component identity across gray levels."""

    __slots__ = ("levels", "areas", "moms", "closed", "parent")

    def __init__(self):
        self.levels: list[int] = []
        self.areas: list[int] = []
        self.moms: list[tuple[float, float, float, float, float]] = []
        self.closed: int = _CLOSE_SENTINEL
        self.parent: int = -1

    def area_at(self, level: int) -> int:
        """Step-function lookup, clamped to the first record before birth."""
        k = bisect_right(self.levels, level) - 1
        return self.areas[max(k, 0)]


def _flood(gray_flat, order, width, height, branches):
    """Union-find flood in gray order; returns per-pixel stats arrays.

    Appends one _Branch per component identity to `branches` and fills their
    histories. Union keeps the larger component's identity (ties go to the
    smaller root id, which preserves order under content translation).
    """
    n = width * height
    parent = np.full(n, -1, dtype=np.int64)
    area = np.zeros(n, dtype=np.int64)
    sx = np.zeros(n)
    sy = np.zeros(n)
    sxx = np.zeros(n)
    sxy = np.zeros(n)
    syy = np.zeros(n)
    branch_of = np.full(n, -1, dtype=np.int64)

    par = parent  # local aliases for the hot loop
    lvl = gray_flat

    def find(i):
        while par[i] != i:
            par[i] = par[par[i]]
            i = par[i]
        return i

    def touch(br, level):
        if br.levels and br.levels[-1] == level:
            return -1
        br.levels.append(level)
        br.areas.append(0)
        br.moms.append((0.0, 0.0, 0.0, 0.0, 0.0))
        return -1

    for idx in order:
        level = int(lvl[idx])
        x = idx % width
        y = idx // width
        par[idx] = idx
        area[idx] = 1
        fx = float(x)
        fy = float(y)
        sx[idx] = fx
        sy[idx] = fy
        sxx[idx] = fx * fx
        sxy[idx] = fx * fy
        syy[idx] = fy * fy
        b = _Branch()
        branch_of[idx] = len(branches)
        branches.append(b)
        root = idx

        if x > 0 and par[idx - 1] >= 0:
            root = _union(root, find(idx - 1), level, par, area, sx, sy, sxx,
                          sxy, syy, branch_of, branches)
        if x < width - 1 and par[idx + 1] >= 0:
            root = _union(root, find(idx + 1), level, par, area, sx, sy, sxx,
                          sxy, syy, branch_of, branches)
        if y > 0 and par[idx - width] >= 0:
            root = _union(root, find(idx - width), level, par, area, sx, sy,
                          sxx, sxy, syy, branch_of, branches)
        if y < height - 1 and par[idx + width] >= 0:
            root = _union(root, find(idx + width), level, par, area, sx, sy,
                          sxx, sxy, syy, branch_of, branches)

        br = branches[branch_of[root]]
        touch(br, level)
        br.areas[-1] = int(area[root])
        br.moms[-1] = (sx[root], sy[root], sxx[root], sxy[root], syy[root])


def _union(ra, rb, level, par, area, sx, sy, sxx, sxy, syy, branch_of, branches):
    if ra == rb:
        return ra
    # larger component keeps its identity; ties keep the smaller root id
    if area[ra] < area[rb] or (area[ra] == area[rb] and rb < ra):
        ra, rb = rb, ra
    loser_branch = branches[branch_of[rb]]
    loser_branch.closed = level
    loser_branch.parent = branch_of[ra]
    par[rb] = ra
    area[ra] += area[rb]
    sx[ra] += sx[rb]
    sy[ra] += sy[rb]
    sxx[ra] += sxx[rb]
    sxy[ra] += sxy[rb]
    syy[ra] += syy[rb]
    return ra


def _area_above(branches, bidx, level):
    """Area of the component containing branch `bidx` at a level >= its own."""
    br = branches[bidx]
    while br.closed <= level:
        if br.parent < 0:
            break
        br = branches[br.parent]
    return br.area_at(level)


@dataclass
class _Candidate:
    bidx: int
    level: int
    area: int
    variation: float
    mom: tuple[float, float, float, float, float]
    keep: bool = True


def _branch_candidates(branches, bidx, delta, max_variation, min_area, max_area):
    br = branches[bidx]
    levels = br.levels
    m = len(levels)
    var = np.empty(m)
    for k in range(m):
        l = levels[k]
        a_plus = _area_above(branches, bidx, min(l + delta, 255))
        a_minus = br.area_at(l - delta)
        var[k] = abs(a_plus - a_minus) / br.areas[k]

    out = []
    k = 0
    while k < m:
        # collapse plateaus of equal variation into a single node
        j = k
        while j + 1 < m and var[j + 1] == var[k]:
            j += 1
        left_ok = k == 0 or var[k] < var[k - 1]
        right_ok = j == m - 1 or var[k] < var[j + 1]
        if left_ok and right_ok and var[k] <= max_variation:
            a = br.areas[k]
            if min_area <= a <= max_area:
                out.append(_Candidate(bidx, levels[k], a, float(var[k]), br.moms[k]))
        k = j + 1
    return out


def _next_candidate_up(cand, by_branch, branches):
    """Nearest candidate strictly above `cand` along the nesting chain."""
    lst = by_branch.get(cand.bidx, [])
    for other in lst:
        if other.level > cand.level:
            return other
    level = branches[cand.bidx].closed
    bidx = branches[cand.bidx].parent
    while bidx >= 0:
        for other in by_branch.get(bidx, []):
            if other.level >= level:
                return other
        level = branches[bidx].closed
        bidx = branches[bidx].parent
    return None


def _dedup(cands, branches, min_diversity):
    by_branch: dict[int, list[_Candidate]] = {}
    for c in cands:
        by_branch.setdefault(c.bidx, []).append(c)
    for lst in by_branch.values():
        lst.sort(key=lambda c: c.level)
    for c in sorted(cands, key=lambda c: c.area):
        if not c.keep:
            continue
        up = _next_candidate_up(c, by_branch, branches)
        if up is None or not up.keep:
            continue
        if (up.area - c.area) / up.area < min_diversity:
            if c.variation <= up.variation:
                up.keep = False
            else:
                c.keep = False
    return [c for c in cands if c.keep]


def _candidate_ellipse(c: _Candidate) -> EllipseRegion | None:
    n = c.area
    mx = c.mom[0] / n
    my = c.mom[1] / n
    cov = np.array(
        [
            [c.mom[2] / n - mx * mx, c.mom[3] / n - mx * my],
            [c.mom[3] / n - mx * my, c.mom[4] / n - my * my],
        ]
    )
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    if det <= 1e-12:
        return None
    shape = np.linalg.inv(4.0 * cov)
    return EllipseRegion(
        cx=mx, cy=my,
        a=float(shape[0, 0]), b=float(shape[0, 1]), c=float(shape[1, 1]),
        area=float(n),
    )


def _detect_one_polarity(gray: np.ndarray, p: MserParams, max_area: int):
    height, width = gray.shape
    flat = gray.reshape(-1)
    order = np.argsort(flat, kind="stable")
    branches: list[_Branch] = []
    _flood(flat, order, width, height, branches)

    cands = []
    for bidx in range(len(branches)):
        if not branches[bidx].levels:
            continue
        if branches[bidx].areas[-1] < p.min_area:
            continue
        cands.extend(
            _branch_candidates(
                branches, bidx, p.delta, p.max_variation, p.min_area, max_area
            )
        )
    kept = _dedup(cands, branches, p.min_diversity)
    regions = []
    for c in kept:
        ell = _candidate_ellipse(c)
        if ell is not None:
            regions.append(ell)
    return regions


def detect_mser(img, p: MserParams | None = None) -> list[EllipseRegion]:
    """Detect MSERs of both polarities, sorted by descending pixel area."""
    p = p or MserParams()
    pixels = img.pixels
    if pixels.shape[0] < 8 or pixels.shape[1] < 8:
        raise DataError("detect_mser needs an image of at least 8x8 pixels")
    max_area = p.max_area
    if max_area is None:
        max_area = max(int(0.01 * pixels.size), p.min_area + 1)
    gray = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
    regions = _detect_one_polarity(gray, p, max_area)
    regions += _detect_one_polarity(255 - gray, p, max_area)
    regions.sort(key=lambda r: (-r.area, r.cy, r.cx))
    return regions
