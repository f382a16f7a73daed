"""Feature-based mosaicking of drone survey frames.

The pipeline detects fast-Hessian interest points, matches their upright
descriptors, fits a translation with RANSAC and joins frames by cropping the
shared strip away and concatenating the rest.  A synthetic flight simulator
provides ground truth for every stage.
"""

from .errors import (
    ConfigError,
    CorruptFile,
    DimensionMismatch,
    DroneMosaicError,
    EmptyInput,
    ExcessiveDrift,
    FilterTooLarge,
    ImageIOError,
    IndexOutOfRange,
    InsufficientMatches,
    NoConsensus,
    NoOverlap,
    OutOfBounds,
    RegionMismatch,
    SceneTooSmall,
    StitchError,
    UnsupportedFormat,
    WindowOutOfBounds,
)
from .features import (
    DetectorParams,
    HessianResponseMap,
    InterestPoint,
    compute_descriptor,
    describe_points,
    detect_and_describe,
    detect_interest_points,
    hessian_response,
)
from .flightsim import (
    CameraConfig,
    Flight,
    FlightConfig,
    GroundTruthPose,
    Metrics,
    evaluate_mosaic,
    generate_flight,
    make_scene,
    required_scene_size,
)
from .image import (
    IntegralImage,
    Rect,
    StitchDirection,
    box_sum,
    concat,
    crop,
    integral_image,
    rotate_quarter,
    to_grayscale,
)
from .imageio import load_image, save_image
from .matching import Match, MatchParams, brute_force_nn, match_descriptors
from .stitcher import (
    MosaicPlan,
    OverlapRegions,
    PairRecord,
    StitchParams,
    StitchReport,
    build_mosaic,
    compute_overlap,
    stitch_pair,
    stitch_sequence,
)
from .transform import (
    RansacParams,
    TransformEstimate,
    Translation2D,
    displacement_residuals,
    estimate_translation,
)

__version__ = "0.1.0"
