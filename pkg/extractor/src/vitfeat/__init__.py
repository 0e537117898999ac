"""Key-feature extraction from ViT backbones plus annotation conversion."""

from .convert import FORMATS, ImageAnnotation, convert, parse_coco_json, parse_voc_xml
from .errors import (
    AnnotationError,
    CheckpointError,
    ConfigError,
    ImageLoadError,
    VitfeatError,
)
from .extract import DEFAULT_LAYERS, ExtractorConfig, extract, extract_image, load_pixels
from .model import (
    DEFAULT_NUM_HEADS,
    VisionTransformer,
    ViTConfig,
    config_from_state_dict,
    load_checkpoint,
    save_checkpoint,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationError",
    "CheckpointError",
    "ConfigError",
    "DEFAULT_LAYERS",
    "DEFAULT_NUM_HEADS",
    "ExtractorConfig",
    "FORMATS",
    "ImageAnnotation",
    "ImageLoadError",
    "VisionTransformer",
    "ViTConfig",
    "VitfeatError",
    "config_from_state_dict",
    "convert",
    "extract",
    "extract_image",
    "load_checkpoint",
    "load_pixels",
    "parse_coco_json",
    "parse_voc_xml",
    "save_checkpoint",
    "__version__",
]
