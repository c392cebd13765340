"""Bag-of-words baseline: a k-means dictionary over SIFT descriptors and a
hard-assignment encoder pooling the same domain-size grid used by DSP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import (
    KIND_BOW,
    Descriptor,
    DescriptorConfig,
    _cells_for_size,
    finalize,
)
from .errors import DataError
from .frames import AffineFrame, SizeSampling, sample_domain_sizes
from .scalespace import ScaleSpace


@dataclass(frozen=True)
class BowDictionary:
    centers: np.ndarray  # (K, 128), unit l2 rows

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _kmeans_pp_seeds(data: np.ndarray, k: int, rng: np.random.Generator):
    n = data.shape[0]
    centers = np.empty((k, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    d2 = ((data - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[i] = data[rng.integers(n)]
            continue
        probs = d2 / total
        centers[i] = data[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((data - centers[i]) ** 2).sum(axis=1))
    return centers


def train_bow_dictionary(descriptors: list[Descriptor], k: int,
                         seed: int = 0, max_iter: int = 100,
                         tol: float = 1e-4) -> BowDictionary:
    """Seeded k-means++ / Lloyd iteration; final centers are l2-normalized.

    Stops after max_iter iterations or once the largest centroid movement
    drops below tol. Runs with the same seed are bit-identical.
    """
    data = np.stack([d.values for d in descriptors if not d.degenerate])
    if k < 1:
        raise DataError("dictionary size must be >= 1")
    if data.shape[0] < k:
        raise DataError(
            f"need at least {k} training descriptors, got {data.shape[0]}"
        )
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_seeds(data, k, rng)
    for _ in range(max_iter):
        d2 = (
            (data**2).sum(axis=1)[:, None]
            + (centers**2).sum(axis=1)[None, :]
            - 2.0 * data @ centers.T
        )
        assign = d2.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = data[assign == c]
            if members.shape[0] > 0:
                new_centers[c] = members.mean(axis=0)
            else:
                # deterministic re-seed: the point farthest from its center
                worst = int(d2[np.arange(len(data)), assign].argmax())
                new_centers[c] = data[worst]
        movement = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if movement < tol:
            break
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return BowDictionary(centers=centers / norms)


def bow_encode(ss: ScaleSpace, frame: AffineFrame, dictionary: BowDictionary,
               sampling: SizeSampling | None = None,
               cfg: DescriptorConfig | None = None) -> Descriptor:
    """Word-frequency histogram of single-size SIFT descriptors computed on
    the domain-size grid, hard-assigned to the nearest word, l1-normalized."""
    cfg = cfg or DescriptorConfig()
    sampling = sampling or SizeSampling()
    counts = np.zeros(dictionary.k)
    for size_k, _w in sample_domain_sizes(frame.sigma_hat, sampling):
        cells = _cells_for_size(ss, frame, size_k, cfg)
        if cells is None:
            continue
        member = finalize(cells, cfg.clamp)
        if member.degenerate:
            continue
        d2 = ((dictionary.centers - member.values) ** 2).sum(axis=1)
        counts[int(d2.argmin())] += 1.0
    total = counts.sum()
    if total <= 0:
        return Descriptor(values=np.full(dictionary.k, 1.0 / dictionary.k),
                          kind=KIND_BOW, degenerate=True)
    return Descriptor(values=counts / total, kind=KIND_BOW)
