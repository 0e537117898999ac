"""Exception taxonomy for extraction and annotation conversion."""


class VitfeatError(Exception):
    """Base class for every error this package raises on purpose."""


class CheckpointError(VitfeatError):
    """Checkpoint file missing, unreadable, or structurally wrong."""


class ConfigError(VitfeatError):
    """Extraction settings incompatible with the loaded model."""


class ImageLoadError(VitfeatError):
    """Image file missing, undecodable, or too small for one patch."""


class AnnotationError(VitfeatError):
    """Annotation file failed to parse or carries inconsistent records."""
