"""Ground-truth labeling, PR curves, AP/mAP, and the benchmark sweeps.

Correspondences are labeled by rasterized intersection-over-union of the
first image's region warped into the second. The PR protocol sweeps an
absolute distance threshold over one-way nearest-neighbor candidates; AP is
the rectangular-rule area under the curve, and mAP averages APs over pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bow import BowDictionary, bow_encode, train_bow_dictionary
from .dataset import GrayImage, Homography, Sequence
from .descriptors import (
    KIND_BOW,
    KIND_DSP,
    KIND_RAW,
    KIND_SIFT,
    KIND_SIFT_L,
    Descriptor,
    DescriptorConfig,
    dsp_sift_descriptor,
    raw_patch_descriptor,
    sift_descriptor,
    sift_l_descriptor,
)
from .errors import DataError
from .frames import AffineFrame, SizeSampling, frame_from_region
from .matching import MatchCandidate, match_all, threshold_sweep
from .mser import EllipseRegion, MserParams, detect_mser
from .scalespace import ScaleSpace, build_scale_space

METHODS = (KIND_SIFT, KIND_DSP, KIND_SIFT_L, KIND_RAW, KIND_BOW)


@dataclass(frozen=True)
class PRCurve:
    points: list[tuple[float, float, float]]  # (threshold, precision, recall)
    ap: float
    n_correspondences: int


@dataclass(frozen=True)
class GroundTruth:
    pairs: frozenset[tuple[int, int]]
    n_correspondences: int  # A-regions with at least one partner


@dataclass
class EvalReport:
    """Per-pair AP table plus mAP per method and exclusion notices."""

    pair_ids: list[str] = field(default_factory=list)
    ap: dict[str, dict[str, float | None]] = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)

    def record(self, method: str, pair_id: str, ap: float | None):
        if pair_id not in self.pair_ids:
            self.pair_ids.append(pair_id)
        self.ap.setdefault(method, {})[pair_id] = ap

    def method_aps(self, method: str) -> dict[str, float | None]:
        return dict(self.ap.get(method, {}))

    def map_score(self, method: str) -> float | None:
        vals = [v for v in self.ap.get(method, {}).values() if v is not None]
        if not vals:
            return None
        return float(np.mean(vals))

    def as_dict(self) -> dict:
        return {
            "pairs": list(self.pair_ids),
            "ap": {m: {p: self.ap[m].get(p) for p in self.pair_ids}
                   for m in sorted(self.ap)},
            "map": {m: self.map_score(m) for m in sorted(self.ap)},
            "notices": list(self.notices),
        }


# ---------------------------------------------------------------------------
# Region overlap
# ---------------------------------------------------------------------------


def ellipse_boundary(region: EllipseRegion, n: int = 360) -> np.ndarray:
    """(n, 2) points on the ellipse boundary."""
    w, v = np.linalg.eigh(region.shape_matrix)
    axes = (v * (1.0 / np.sqrt(w))) @ v.T
    phi = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    circle = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    return circle @ axes.T + np.array([region.cx, region.cy])


def warped_polygon(region: EllipseRegion, hmg: Homography,
                   n: int = 360) -> np.ndarray:
    return hmg.apply(ellipse_boundary(region, n))


def _rasterize_polygon(poly: np.ndarray, xs: np.ndarray,
                       ys: np.ndarray) -> np.ndarray:
    """Even-odd scanline rasterization of a closed polygon on a grid."""
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    mask = np.empty((ys.size, xs.size), dtype=bool)
    for r, y in enumerate(ys):
        span = (y0 <= y) != (y1 <= y)
        if not span.any():
            mask[r] = False
            continue
        xc = x0[span] + (y - y0[span]) * (x1[span] - x0[span]) / (y1[span] - y0[span])
        xc.sort()
        mask[r] = (np.searchsorted(xc, xs, side="right") % 2).astype(bool)
    return mask


def region_iou(region_a: EllipseRegion, region_b: EllipseRegion,
               hmg: Homography, grid: int = 200,
               boundary_samples: int = 360,
               polygon_a: np.ndarray | None = None) -> float:
    """Rasterized IoU of region A warped into B's image against region B.

    Both masks are sampled on a shared grid covering the union of the two
    bounding boxes, which keeps the rasterization error well below the 0.5
    decision threshold at the default resolution.
    """
    if grid < 2:
        raise DataError("IoU grid must have at least 2 cells per side")
    poly = polygon_a if polygon_a is not None else warped_polygon(
        region_a, hmg, boundary_samples)
    if not np.isfinite(poly).all():
        return 0.0
    ax_min, ay_min = poly.min(axis=0)
    ax_max, ay_max = poly.max(axis=0)
    bx_min, by_min, bx_max, by_max = region_b.bounding_box()
    x_min, x_max = min(ax_min, bx_min), max(ax_max, bx_max)
    y_min, y_max = min(ay_min, by_min), max(ay_max, by_max)
    if x_max <= x_min or y_max <= y_min:
        return 0.0
    xs = np.linspace(x_min, x_max, grid)
    ys = np.linspace(y_min, y_max, grid)
    cell_area = (xs[1] - xs[0]) * (ys[1] - ys[0])

    mask_a = _rasterize_polygon(poly, xs, ys)
    dx = xs[None, :] - region_b.cx
    dy = ys[:, None] - region_b.cy
    quad = (region_b.a * dx**2 + 2 * region_b.b * dx * dy + region_b.c * dy**2)
    mask_b = quad <= 1.0

    if np.count_nonzero(mask_a) * cell_area < 1.0:
        return 0.0
    inter = float(np.count_nonzero(mask_a & mask_b))
    union = float(np.count_nonzero(mask_a | mask_b))
    if union == 0:
        return 0.0
    return inter / union


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2)


def ground_truth_correspondences(
    regions_a: list[EllipseRegion],
    regions_b: list[EllipseRegion],
    hmg: Homography,
    iou_min: float = 0.5,
    grid: int = 200,
) -> GroundTruth:
    """All (i, j) with IoU above the threshold.

    Rasterization is skipped for pairs whose analytic IoU upper bound
    min(bbox overlap, smaller area) / larger area cannot exceed the
    threshold; the bound is sound, so the decisions match an exhaustive
    all-pairs sweep exactly.
    """
    polys = [warped_polygon(r, hmg) for r in regions_a]
    boxes_a, areas_a = [], []
    for poly in polys:
        if np.isfinite(poly).all():
            boxes_a.append((*poly.min(axis=0), *poly.max(axis=0)))
            areas_a.append(_polygon_area(poly))
        else:
            boxes_a.append(None)
            areas_a.append(0.0)
    boxes_b = [r.bounding_box() for r in regions_b]
    areas_b = [r.ellipse_area for r in regions_b]
    pairs = set()
    matched_a = set()
    for i, box_a in enumerate(boxes_a):
        if box_a is None or areas_a[i] <= 0:
            continue
        ax0, ay0, ax1, ay1 = box_a
        for j, (bx0, by0, bx1, by1) in enumerate(boxes_b):
            ix = min(ax1, bx1) - max(ax0, bx0)
            iy = min(ay1, by1) - max(ay0, by0)
            if ix <= 0 or iy <= 0:
                continue
            larger = max(areas_a[i], areas_b[j])
            bound = min(ix * iy, min(areas_a[i], areas_b[j])) / larger
            if bound <= iou_min:
                continue
            iou = region_iou(regions_a[i], regions_b[j], hmg, grid,
                             polygon_a=polys[i])
            if iou > iou_min:
                pairs.add((i, j))
                matched_a.add(i)
    return GroundTruth(pairs=frozenset(pairs), n_correspondences=len(matched_a))


# ---------------------------------------------------------------------------
# PR curves
# ---------------------------------------------------------------------------


def pr_curve(candidates: list[MatchCandidate],
             gt: GroundTruth | frozenset,
             n_correspondences: int | None = None) -> PRCurve:
    """Threshold-swept precision/recall and its rectangular-rule AP."""
    if isinstance(gt, GroundTruth):
        gt_pairs = gt.pairs
        n_corr = gt.n_correspondences if n_correspondences is None else n_correspondences
    else:
        gt_pairs = gt
        n_corr = n_correspondences
    if not n_corr or n_corr <= 0:
        raise DataError("AP undefined: pair has no ground-truth correspondences")
    labels = np.array([(c.i, c.j) in gt_pairs for c in candidates], dtype=bool)
    cum_tp = np.cumsum(labels)
    points = []
    ap = 0.0
    prev_recall = 0.0
    for cut in threshold_sweep(candidates):
        tp = int(cum_tp[cut - 1])
        precision = tp / cut
        recall = tp / n_corr
        points.append((candidates[cut - 1].d, precision, recall))
        ap += precision * (recall - prev_recall)
        prev_recall = recall
    return PRCurve(points=points, ap=float(ap), n_correspondences=int(n_corr))


# ---------------------------------------------------------------------------
# Pipeline configuration and per-image preparation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    methods: tuple[str, ...] = (KIND_SIFT, KIND_DSP)
    sampling: SizeSampling = field(default_factory=SizeSampling)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)
    dilation: float = 3.0
    metric: str = "l2"
    iou_min: float = 0.5
    iou_grid: int = 200
    mser: MserParams = field(default_factory=MserParams)
    sigma0: float = 1.6
    levels_per_octave: int = 3
    bow_k: int = 512
    seed: int = 0

    def metric_for(self, method: str) -> str:
        # the bag-of-words protocol compares histograms with l1
        return "l1" if method == KIND_BOW else self.metric


@dataclass
class PreparedImage:
    """Everything reusable across methods and sweep points for one image."""

    image: GrayImage
    regions: list[EllipseRegion]
    frames: list[AffineFrame | None]
    scale_space: ScaleSpace


def prepare_image(img: GrayImage, cfg: PipelineConfig,
                  regions: list[EllipseRegion] | None = None) -> PreparedImage:
    if regions is None:
        regions = detect_mser(img, cfg.mser)
    ss = build_scale_space(img, cfg.sigma0, cfg.levels_per_octave)
    frames: list[AffineFrame | None] = []
    for r in regions:
        try:
            frames.append(frame_from_region(
                r, img, cfg.dilation, cfg.descriptor.patch_base))
        except DataError:
            frames.append(None)
    return PreparedImage(image=img, regions=regions, frames=frames,
                         scale_space=ss)


def descriptors_for(prep: PreparedImage, method: str, cfg: PipelineConfig,
                    sampling: SizeSampling | None = None,
                    dictionary: BowDictionary | None = None) -> list[Descriptor]:
    """Descriptors for every region; failed frames become degenerate entries
    so indices stay aligned with the ground-truth labeling."""
    sampling = sampling or cfg.sampling
    out: list[Descriptor] = []
    for frame in prep.frames:
        if frame is None:
            dim = (RAW_DIM if method == KIND_RAW
                   else dictionary.k if method == KIND_BOW and dictionary
                   else 128)
            out.append(Descriptor(values=np.full(dim, 1.0 / np.sqrt(dim)),
                                  kind=method, degenerate=True))
            continue
        if method == KIND_SIFT:
            out.append(sift_descriptor(prep.scale_space, frame, cfg.descriptor))
        elif method == KIND_DSP:
            out.append(dsp_sift_descriptor(prep.scale_space, frame, sampling,
                                           cfg.descriptor))
        elif method == KIND_SIFT_L:
            out.append(sift_l_descriptor(prep.scale_space, frame,
                                         sampling.lambda2, cfg.descriptor))
        elif method == KIND_RAW:
            out.append(raw_patch_descriptor(prep.scale_space, frame))
        elif method == KIND_BOW:
            if dictionary is None:
                raise DataError("bag-of-words method needs a trained dictionary")
            out.append(bow_encode(prep.scale_space, frame, dictionary,
                                  sampling, cfg.descriptor))
        else:
            raise DataError(f"unknown method {method!r}")
    return out


RAW_DIM = 91 * 91


def train_dictionary_for(preps: list[PreparedImage], cfg: PipelineConfig,
                         max_train: int = 20000) -> BowDictionary:
    """Dictionary for the bag-of-words baseline, trained on SIFT descriptors
    drawn from the evaluated images themselves (seeded subsample)."""
    pool: list[Descriptor] = []
    for prep in preps:
        pool.extend(d for d in descriptors_for(prep, KIND_SIFT, cfg)
                    if not d.degenerate)
    if len(pool) > max_train:
        rng = np.random.default_rng(cfg.seed)
        keep = rng.choice(len(pool), size=max_train, replace=False)
        pool = [pool[int(k)] for k in sorted(keep)]
    k = min(cfg.bow_k, max(1, len(pool)))
    return train_bow_dictionary(pool, k, seed=cfg.seed)


# ---------------------------------------------------------------------------
# Pair and dataset evaluation
# ---------------------------------------------------------------------------


@dataclass
class PairOutcome:
    pair_id: str
    ap: dict[str, float | None]
    curves: dict[str, PRCurve | None]
    matches: dict[str, list[tuple[int, int, float, int]]]
    notices: list[str]


def evaluate_pair(prep_a: PreparedImage, prep_b: PreparedImage,
                  hmg: Homography, cfg: PipelineConfig, pair_id: str = "pair",
                  dictionary: BowDictionary | None = None,
                  descs_a: dict[str, list[Descriptor]] | None = None,
                  descs_b: dict[str, list[Descriptor]] | None = None,
                  gt: GroundTruth | None = None) -> PairOutcome:
    """Match every requested method on one image pair and score PR/AP."""
    if gt is None:
        gt = ground_truth_correspondences(
            prep_a.regions, prep_b.regions, hmg, cfg.iou_min, cfg.iou_grid)
    outcome = PairOutcome(pair_id=pair_id, ap={}, curves={}, matches={},
                          notices=[])
    for method in cfg.methods:
        da = (descs_a or {}).get(method)
        db = (descs_b or {}).get(method)
        if da is None:
            da = descriptors_for(prep_a, method, cfg, dictionary=dictionary)
        if db is None:
            db = descriptors_for(prep_b, method, cfg, dictionary=dictionary)
        if not da or not db:
            outcome.ap[method] = None
            outcome.curves[method] = None
            outcome.matches[method] = []
            outcome.notices.append(f"{pair_id}/{method}: no regions to match")
            continue
        cands = match_all(da, db, cfg.metric_for(method))
        labeled = [(c.i, c.j, c.d, int((c.i, c.j) in gt.pairs)) for c in cands]
        outcome.matches[method] = labeled
        if gt.n_correspondences == 0:
            outcome.ap[method] = None
            outcome.curves[method] = None
            outcome.notices.append(
                f"{pair_id}/{method}: excluded, no ground-truth correspondences")
            continue
        curve = pr_curve(cands, gt)
        outcome.ap[method] = curve.ap
        outcome.curves[method] = curve
    return outcome


def evaluate_sequences(sequences: list[Sequence], cfg: PipelineConfig,
                       jobs: int = 1,
                       regions_by_image: dict[tuple[str, int],
                                              list[EllipseRegion]] | None = None,
                       collect_outcomes: list[PairOutcome] | None = None
                       ) -> EvalReport:
    """Evaluate every (1, j) pair of every sequence and assemble the report."""
    from .parallel import pmap

    prep_tasks = []
    for seq in sequences:
        for idx, img in enumerate(seq.images, start=1):
            regions = None
            if regions_by_image is not None:
                regions = regions_by_image.get((seq.name, idx))
            prep_tasks.append((img, cfg, regions))
    preps_flat = pmap(_prepare_task, prep_tasks, jobs)
    preps: dict[tuple[str, int], PreparedImage] = {}
    cursor = 0
    for seq in sequences:
        for idx in range(1, len(seq.images) + 1):
            preps[(seq.name, idx)] = preps_flat[cursor]
            cursor += 1

    dictionary = None
    if KIND_BOW in cfg.methods:
        dictionary = train_dictionary_for(list(preps.values()), cfg)

    pair_tasks = []
    for seq in sequences:
        for j, hmg in seq.pairs():
            pair_tasks.append((preps[(seq.name, 1)], preps[(seq.name, j)],
                               hmg, cfg, f"{seq.name}/1to{j}", dictionary))
    outcomes = pmap(_pair_task, pair_tasks, jobs)

    report = EvalReport()
    for outcome in outcomes:
        for method in cfg.methods:
            report.record(method, outcome.pair_id, outcome.ap[method])
        report.notices.extend(outcome.notices)
        if collect_outcomes is not None:
            collect_outcomes.append(outcome)
    return report


def _prepare_task(args):
    img, cfg, regions = args
    return prepare_image(img, cfg, regions)


def _pair_task(args):
    prep_a, prep_b, hmg, cfg, pair_id, dictionary = args
    return evaluate_pair(prep_a, prep_b, hmg, cfg, pair_id, dictionary)


# ---------------------------------------------------------------------------
# Sweeps and head-to-head comparison
# ---------------------------------------------------------------------------


def _pooled_pairs(sequences, preps, cfg):
    """(pair_id, prep_a, prep_b, gt) with ground truth computed once."""
    out = []
    for seq in sequences:
        for j, hmg in seq.pairs():
            pa = preps[(seq.name, 1)]
            pb = preps[(seq.name, j)]
            gt = ground_truth_correspondences(
                pa.regions, pb.regions, hmg, cfg.iou_min, cfg.iou_grid)
            out.append((f"{seq.name}/1to{j}", pa, pb, gt))
    return out


def _map_for_sampling(pairs, cfg, sampling, method=KIND_DSP):
    aps = []
    for _pid, pa, pb, gt in pairs:
        if gt.n_correspondences == 0:
            continue
        da = descriptors_for(pa, method, cfg, sampling=sampling)
        db = descriptors_for(pb, method, cfg, sampling=sampling)
        cands = match_all(da, db, cfg.metric_for(method))
        aps.append(pr_curve(cands, gt).ap)
    return float(np.mean(aps)) if aps else None


def prepare_all(sequences: list[Sequence], cfg: PipelineConfig, jobs: int = 1):
    from .parallel import pmap

    tasks = [(img, cfg, None) for seq in sequences for img in seq.images]
    flat = pmap(_prepare_task, tasks, jobs)
    preps = {}
    cursor = 0
    for seq in sequences:
        for idx in range(1, len(seq.images) + 1):
            preps[(seq.name, idx)] = flat[cursor]
            cursor += 1
    return preps


def sweep_pooling_radius(sequences: list[Sequence], radii: list[float],
                         cfg: PipelineConfig, jobs: int = 1,
                         preps=None) -> list[tuple[float, float | None]]:
    """mAP as a function of the relative pooling radius r: the pooling
    interval is (1-r, 1+r) * sigma_hat, clipped to positive sizes."""
    if any(r <= 0 for r in radii):
        raise DataError("pooling radii must be positive")
    preps = preps or prepare_all(sequences, cfg, jobs)
    pairs = _pooled_pairs(sequences, preps, cfg)
    table = []
    for r in radii:
        lo = max(1.0 - r, 1e-3)
        sampling = SizeSampling(lambda1=lo, lambda2=1.0 + r, n=cfg.sampling.n)
        table.append((r, _map_for_sampling(pairs, cfg, sampling)))
    return table


def sweep_sample_count(sequences: list[Sequence], counts: list[int],
                       cfg: PipelineConfig, jobs: int = 1, radius: float = 0.5,
                       preps=None) -> list[tuple[int, float | None]]:
    """mAP as a function of the number of size samples on the fixed best
    pooling range (radius sigma_hat/2 by default)."""
    if any(n < 1 for n in counts):
        raise DataError("sample counts must be >= 1")
    preps = preps or prepare_all(sequences, cfg, jobs)
    pairs = _pooled_pairs(sequences, preps, cfg)
    lo = max(1.0 - radius, 1e-3)
    table = []
    for n in counts:
        sampling = SizeSampling(lambda1=lo, lambda2=1.0 + radius, n=n)
        table.append((n, _map_for_sampling(pairs, cfg, sampling)))
    return table


@dataclass(frozen=True)
class HeadToHead:
    pair_ids: list[str]
    points: list[tuple[float, float]]  # (ap_a, ap_b) per pair
    relative_improvement: float | None  # (mAP_a - mAP_b) / mAP_b


def head_to_head(aps_a: dict[str, float | None],
                 aps_b: dict[str, float | None]) -> HeadToHead:
    """Paired APs of two methods over the same pair set."""
    if set(aps_a) != set(aps_b):
        raise DataError("head-to-head requires identical pair sets")
    ids = sorted(aps_a)
    points = []
    kept_a, kept_b = [], []
    for pid in ids:
        a, b = aps_a[pid], aps_b[pid]
        if a is None or b is None:
            continue
        points.append((a, b))
        kept_a.append(a)
        kept_b.append(b)
    if not kept_a or np.mean(kept_b) == 0:
        rel = None
    else:
        map_a, map_b = float(np.mean(kept_a)), float(np.mean(kept_b))
        rel = (map_a - map_b) / map_b
    return HeadToHead(pair_ids=ids, points=points, relative_improvement=rel)
