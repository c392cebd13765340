"""One-way nearest-neighbor matching with an absolute-threshold sweep."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .descriptors import Descriptor
from .errors import DataError


class MatchCandidate(NamedTuple):
    i: int
    j: int
    d: float


def distance(p: Descriptor, q: Descriptor, metric: str = "l2") -> float:
    """Euclidean or l1 distance; degenerate descriptors never match."""
    if p.dim != q.dim:
        raise DataError(f"descriptor dims differ: {p.dim} vs {q.dim}")
    if p.kind != q.kind:
        raise DataError(f"descriptor kinds differ: {p.kind} vs {q.kind}")
    if p.degenerate or q.degenerate:
        return float("inf")
    diff = p.values - q.values
    if metric == "l2":
        return float(np.linalg.norm(diff))
    if metric == "l1":
        return float(np.abs(diff).sum())
    raise DataError(f"unknown metric {metric!r}")


def distance_matrix(a: list[Descriptor], b: list[Descriptor],
                    metric: str = "l2") -> np.ndarray:
    """(|A|, |B|) distances with +inf rows/columns for degenerate entries."""
    if not a or not b:
        raise DataError("descriptor lists must be nonempty")
    if a[0].dim != b[0].dim or a[0].kind != b[0].kind:
        raise DataError("descriptor lists are not comparable")
    mat_a = np.stack([d.values for d in a])
    mat_b = np.stack([d.values for d in b])
    if metric == "l2":
        sq = (
            (mat_a**2).sum(axis=1)[:, None]
            + (mat_b**2).sum(axis=1)[None, :]
            - 2.0 * (mat_a @ mat_b.T)
        )
        dist = np.sqrt(np.maximum(sq, 0.0))
    elif metric == "l1":
        dist = np.empty((len(a), len(b)))
        for i in range(len(a)):
            dist[i] = np.abs(mat_b - mat_a[i]).sum(axis=1)
    else:
        raise DataError(f"unknown metric {metric!r}")
    bad_a = np.array([d.degenerate for d in a])
    bad_b = np.array([d.degenerate for d in b])
    dist[bad_a, :] = np.inf
    dist[:, bad_b] = np.inf
    return dist


def match_all(a: list[Descriptor], b: list[Descriptor],
              metric: str = "l2") -> list[MatchCandidate]:
    """One nearest neighbor in B per query in A, ties to the smaller j,
    sorted ascending by distance with stable query order."""
    dist = distance_matrix(a, b, metric)
    nn = dist.argmin(axis=1)
    d = dist[np.arange(len(a)), nn]
    order = np.argsort(d, kind="stable")
    return [MatchCandidate(int(i), int(nn[i]), float(d[i])) for i in order]


def threshold_sweep(candidates: list[MatchCandidate]) -> list[int]:
    """Prefix lengths of the sorted candidate list at each distinct distance."""
    cuts = []
    for k, cand in enumerate(candidates):
        if k + 1 < len(candidates) and candidates[k + 1].d == cand.d:
            continue
        cuts.append(k + 1)
    return cuts
