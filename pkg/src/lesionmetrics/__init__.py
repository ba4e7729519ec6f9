"""Volume-aware Dice losses and lesion-wise evaluation for 3D segmentations.

A numpy/scipy library (plus a small CLI) for computing volume-weighted
losses with analytic gradients, connected-component weight maps, surface
metrics (surface Dice, mean surface distance, robust Hausdorff), lesion
detection statistics and paired Wilcoxon comparisons, independent of any
training framework.
"""

from .components import ComponentMap, Connectivity, DEFAULT_CONNECTIVITY, WeightMap, label_components, weight_map
from .loss import (
    ConfiguredLossResult,
    DiceMode,
    LossConfig,
    LossResult,
    WeightMapCache,
    configured_loss,
    cross_entropy_loss,
    preset,
    soft_dice_loss,
    va_dice_loss,
    weighted_overlap_term,
)
from .overlap import (
    DetectionResult,
    LesionMatchTable,
    adaptive_dice,
    adaptive_dice_normalized,
    detection_metrics,
    lesionwise_dice,
    volumetric_dice,
)
from .phantom import Lesion, PhantomResult, PhantomSpec, generate
from .stats import (
    DegenerateSampleError,
    MetricRow,
    PairedSample,
    WilcoxonResult,
    aggregate_runs,
    config_mean,
    wilcoxon_signed_rank,
)
from .surface import (
    SurfaceDistances,
    SurfaceElementSet,
    extract_surface,
    hd95,
    mean_surface_distance,
    surface_dice,
    surface_distances,
)
from .volume import (
    BinaryMask,
    LabelVolume,
    ProbVolume,
    Spacing,
    VolumeFormatError,
    extract_class,
    load_volume,
    save_volume,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "ComponentMap",
    "ConfiguredLossResult",
    "Connectivity",
    "DEFAULT_CONNECTIVITY",
    "DegenerateSampleError",
    "DetectionResult",
    "DiceMode",
    "LabelVolume",
    "Lesion",
    "LesionMatchTable",
    "LossConfig",
    "LossResult",
    "MetricRow",
    "PairedSample",
    "PhantomResult",
    "PhantomSpec",
    "ProbVolume",
    "Spacing",
    "SurfaceDistances",
    "SurfaceElementSet",
    "VolumeFormatError",
    "WeightMap",
    "WeightMapCache",
    "WilcoxonResult",
    "adaptive_dice",
    "adaptive_dice_normalized",
    "aggregate_runs",
    "config_mean",
    "configured_loss",
    "cross_entropy_loss",
    "detection_metrics",
    "extract_class",
    "extract_surface",
    "generate",
    "hd95",
    "label_components",
    "lesionwise_dice",
    "load_volume",
    "mean_surface_distance",
    "preset",
    "save_volume",
    "soft_dice_loss",
    "surface_dice",
    "surface_distances",
    "va_dice_loss",
    "volumetric_dice",
    "weight_map",
    "weighted_overlap_term",
    "wilcoxon_signed_rank",
]
