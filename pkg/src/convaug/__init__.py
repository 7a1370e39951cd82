"""Deterministic preprocessing, augmentation and evaluation for
conversation-analysis video tasks (bodily behavior recognition, eye contact
detection, next speaker prediction).

Pixel tensors are exchanged as "CTNS" blobs, sample lists as manifest CSVs,
and every random augmentation draw is keyed by (global seed, sample id,
operator index), so identical inputs always produce identical bytes.
"""

from .augment import (
    AugmentPipeline,
    ColorJitterSpec,
    LightingSpec,
    RandAugmentSpec,
    RandomErasingSpec,
    apply_pipeline,
    fit_pca,
    load_pipeline_config,
)
from .core import (
    BlobDType,
    BlobFormatError,
    Clip,
    ImageBuffer,
    RngStream,
    derive_sample_seed,
    fnv1a64,
    quantize_u8,
    read_array_blob,
    read_tensor_blob,
    splitmix64,
    write_array_blob,
    write_tensor_blob,
)
from .imageio import ImageFormatError, read_image, write_image
from .manifest import (
    ManifestEntry,
    ManifestError,
    enumerate_views,
    load_manifest,
    parse_manifest,
    save_manifest,
    split_counts,
)
from .metrics import (
    ScoredPrediction,
    ScoreReport,
    ScoringError,
    UndefinedMetricError,
    accuracy,
    average_precision,
    load_predictions,
    mean_average_precision,
    score_submission,
    uar,
)
from .preprocess import (
    CropSpec,
    FaceBox,
    SamplingPolicy,
    bilinear_resize,
    concat_views,
    discover_clip,
    face_crop,
    sample_frames,
    strip_crop,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentPipeline",
    "BlobDType",
    "BlobFormatError",
    "Clip",
    "ColorJitterSpec",
    "CropSpec",
    "FaceBox",
    "ImageBuffer",
    "ImageFormatError",
    "LightingSpec",
    "ManifestEntry",
    "ManifestError",
    "RandAugmentSpec",
    "RandomErasingSpec",
    "RngStream",
    "SamplingPolicy",
    "ScoredPrediction",
    "ScoreReport",
    "ScoringError",
    "UndefinedMetricError",
    "accuracy",
    "apply_pipeline",
    "average_precision",
    "bilinear_resize",
    "concat_views",
    "derive_sample_seed",
    "discover_clip",
    "enumerate_views",
    "face_crop",
    "fit_pca",
    "fnv1a64",
    "load_manifest",
    "load_pipeline_config",
    "load_predictions",
    "mean_average_precision",
    "parse_manifest",
    "quantize_u8",
    "read_array_blob",
    "read_image",
    "read_tensor_blob",
    "sample_frames",
    "save_manifest",
    "score_submission",
    "splitmix64",
    "split_counts",
    "strip_crop",
    "uar",
    "write_array_blob",
    "write_image",
    "write_tensor_blob",
    "__version__",
]
