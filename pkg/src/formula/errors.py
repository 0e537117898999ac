"""Exception types shared across the package."""


class FormulaError(Exception):
    """Base class for every error raised by this library."""


# ---------------------------------------------------------------- file I/O

class MalformedManifest(FormulaError):
    """Manifest JSON is missing a field, has a wrong type, or is inconsistent."""


class MalformedFeatureFile(FormulaError):
    """Feature file violates the interchange format (magic, header, payload size)."""


class ShapeMismatch(FormulaError):
    """Feature tensor shape disagrees with the manifest."""


class UnsupportedDtype(FormulaError):
    """Feature file is not little-endian 32-bit float."""


class NonFiniteFeature(FormulaError):
    """Feature tensor contains NaN or Inf entries."""


class MalformedRecord(FormulaError):
    """A JSON Lines record cannot be parsed or violates its invariants."""


class DuplicateImageId(FormulaError):
    """The same image_id occurs more than once."""


class InvalidBox(FormulaError):
    """Box is degenerate or lies outside the image."""


class IoFailure(FormulaError):
    """Underlying OS-level read/write failure."""


# ---------------------------------------------------------------- numerics

class ZeroNormRow(FormulaError):
    """A patch feature vector is identically zero."""


class SingularDegree(FormulaError):
    """Graph has a node with nonpositive degree; the eigenproblem is undefined."""


class NoConvergence(FormulaError):
    """Eigensolver exhausted its iteration budget or failed its residual check."""


# ---------------------------------------------------------- heads and core

class EmptyForeground(FormulaError):
    """Mask extraction found no foreground patch; caller should fall back."""


class EmptyMask(FormulaError):
    """Operation requires at least one foreground patch."""


class LengthMismatch(FormulaError):
    """Fusion weight count differs from the number of stored layers."""


class GridMismatch(FormulaError):
    """Two per-grid objects have different grid dimensions."""


# -------------------------------------------------------------- evaluation

class MissingPrediction(FormulaError):
    """A ground-truth image has no predicted box."""


class UnknownImageId(FormulaError):
    """A prediction refers to an image absent from the ground truth."""


# ---------------------------------------------------------------- synthesis

class InvalidSpec(FormulaError):
    """Planted-scene parameters are inconsistent."""
