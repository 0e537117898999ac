"""Unsupervised single-object discovery on pre-extracted ViT patch features.

The pipeline fuses multi-layer patch features, runs one of two saliency
heads (inverse-degree or spectral bipartition) over the intra-image
similarity graph, and refines the resulting mask by iterative Gaussian
foreground guidance.  Everything operates on stored feature tensors; no
model inference happens here.
"""

from . import errors
from .core import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_SIGMA,
    DEFAULT_TAU,
    PRESET_FUSION_WEIGHTS,
    Center,
    FusionWeights,
    GuidanceConfig,
    ProbabilityMap,
    foreground_guided_detect,
    fuse_layers,
    gaussian_map,
    gaussian_raw,
    mask_centroid,
    reweight,
)
from .evaluation import EvalReport, PerImageResult, corloc, iou
from .feature_io import (
    DetectionRecord,
    GroundTruth,
    Manifest,
    read_detections,
    read_features,
    read_ground_truth,
    read_manifest,
    write_detections,
    write_feature_array,
    write_ground_truth,
    write_manifest,
)
from .heads import (
    Head,
    HeadContext,
    IntermediateMap,
    MapKind,
    ObjectMask,
    build_intermediate_map,
    extract_mask,
    mask_to_box,
    uniform_scale_invariance_check,
)
from .numerics import (
    EigenResult,
    cosine_similarity_matrix,
    second_smallest_generalized_eigpair,
)
from .synth import Rect, SceneSpec, generate_scene, write_scene

__version__ = "0.1.0"

__all__ = [
    "errors",
    "Center",
    "DEFAULT_MAX_ITERATIONS",
    "DEFAULT_SIGMA",
    "DEFAULT_TAU",
    "DetectionRecord",
    "EigenResult",
    "EvalReport",
    "FusionWeights",
    "GroundTruth",
    "GuidanceConfig",
    "Head",
    "HeadContext",
    "IntermediateMap",
    "Manifest",
    "MapKind",
    "ObjectMask",
    "PerImageResult",
    "PRESET_FUSION_WEIGHTS",
    "ProbabilityMap",
    "Rect",
    "SceneSpec",
    "build_intermediate_map",
    "corloc",
    "cosine_similarity_matrix",
    "extract_mask",
    "foreground_guided_detect",
    "fuse_layers",
    "gaussian_map",
    "gaussian_raw",
    "generate_scene",
    "iou",
    "mask_centroid",
    "mask_to_box",
    "read_detections",
    "read_features",
    "read_ground_truth",
    "read_manifest",
    "reweight",
    "second_smallest_generalized_eigpair",
    "uniform_scale_invariance_check",
    "write_detections",
    "write_feature_array",
    "write_ground_truth",
    "write_manifest",
    "write_scene",
]
