"""histair: rigid image registration through multi-level histogram
segmentation, region matching and statistical mode voting."""

from .enhance import EnhanceConfig, match_histogram, preprocess_pair, wiener_filter
from .estimate import (
    EstimationError,
    RigidTransform,
    VoteConfig,
    estimate_rotation,
    estimate_transform,
    estimate_translation,
)
from .features import RegionFeatures, compute_region_features, wrap_180
from .matching import (
    MatchCandidate,
    MatchingConfig,
    MatchingError,
    build_candidates,
    gamma_cost,
    pool_regions,
)
from .oracle import oracle_search
from .raster import GrayImage, Histogram, compute_histogram, load_image, save_image
from .scene import make_test_scene
from .segment import (
    LabeledRegions,
    ModeSet,
    SegmentationConfig,
    SegmentationError,
    detect_modes,
    extract_regions,
    segment_multilevel,
    smooth_histogram,
    threshold_by_modes,
)
from .warp import (
    PipelineConfig,
    RegistrationResult,
    ResampleConfig,
    apply_transform,
    invert,
    register_pair,
)

__version__ = "0.1.0"
