"""Domain-size pooled SIFT descriptors and a wide-baseline matching harness."""

from .dataset import (
    GrayImage,
    Homography,
    Sequence,
    load_homography,
    load_image,
    load_regions,
    load_sequence,
    write_pgm,
    write_regions,
)
from .descriptors import (
    Descriptor,
    DescriptorConfig,
    dsp_sift_descriptor,
    finalize,
    raw_patch_descriptor,
    sift_cells,
    sift_descriptor,
    sift_l_descriptor,
)
from .errors import ConfigError, DataError, DspSiftError
from .frames import (
    AffineFrame,
    Patch,
    SizeSampling,
    dominant_orientation,
    extract_patch,
    frame_from_region,
    sample_domain_sizes,
)
from .matching import MatchCandidate, distance, match_all, threshold_sweep
from .mser import EllipseRegion, MserParams, detect_mser, ellipse_from_moments
from .scalespace import (
    GradientField,
    ScaleSpace,
    build_scale_space,
    gradients,
    octave_for_scale,
)

__version__ = "0.1.0"

__all__ = [
    "AffineFrame",
    "ConfigError",
    "DataError",
    "Descriptor",
    "DescriptorConfig",
    "DspSiftError",
    "EllipseRegion",
    "GradientField",
    "GrayImage",
    "Homography",
    "MatchCandidate",
    "MserParams",
    "Patch",
    "ScaleSpace",
    "Sequence",
    "SizeSampling",
    "build_scale_space",
    "detect_mser",
    "distance",
    "dominant_orientation",
    "dsp_sift_descriptor",
    "ellipse_from_moments",
    "extract_patch",
    "finalize",
    "frame_from_region",
    "gradients",
    "load_homography",
    "load_image",
    "load_regions",
    "load_sequence",
    "match_all",
    "octave_for_scale",
    "raw_patch_descriptor",
    "sample_domain_sizes",
    "sift_cells",
    "sift_descriptor",
    "sift_l_descriptor",
    "threshold_sweep",
    "write_pgm",
    "write_regions",
]
