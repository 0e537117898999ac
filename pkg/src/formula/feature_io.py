"""Reading and writing the on-disk interchange formats.

Feature tensors travel in a narrow subset of the NPY version-1.0 format:
magic ``\\x93NUMPY``, version ``(1, 0)``, a header declaring ``descr``
``'<f4'``, ``fortran_order`` ``False`` and a three-element ``shape``
``(num_layers, num_patches, feature_dim)``, followed by the raw
little-endian float32 payload in C order.  Layer index 0 is the last
transformer layer; patch index ``r * grid_w + c`` is the cell at row ``r``,
column ``c`` of the patch grid, top-left first.  The class token is never
stored.

Per-image metadata is a JSON manifest with exactly the fields listed in
``MANIFEST_FIELDS``.  Ground truth and predictions are UTF-8 JSON Lines,
one object per line, with pixel coordinates as floats and ``xmax``/``ymax``
exclusive-style (widths are plain ``xmax - xmin``, no +1).
"""

from __future__ import annotations

import ast
import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateImageId,
    InvalidBox,
    IoFailure,
    MalformedFeatureFile,
    MalformedManifest,
    MalformedRecord,
    NonFiniteFeature,
    ShapeMismatch,
    UnsupportedDtype,
)

_NPY_MAGIC = b"\x93NUMPY"
_NPY_VERSION = b"\x01\x00"
_HEADER_ALIGN = 64

MANIFEST_FIELDS = (
    "image_id",
    "image_width",
    "image_height",
    "patch_size",
    "grid_h",
    "grid_w",
    "num_layers",
    "feature_dim",
    "feature_file",
)

Box = tuple[float, float, float, float]


def _require_positive_int(raw: object, name: str) -> int:
    # bool is an int subclass; reject it explicitly
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise MalformedManifest(f"field {name!r} must be an integer, got {raw!r}")
    if raw <= 0:
        raise MalformedManifest(f"field {name!r} must be positive, got {raw}")
    return raw


@dataclass(frozen=True)
class Manifest:
    """Per-image metadata tying a feature file to pixel geometry."""

    image_id: str
    image_width: int
    image_height: int
    patch_size: int
    grid_h: int
    grid_w: int
    num_layers: int
    feature_dim: int
    feature_file: str

    def __post_init__(self) -> None:
        if not isinstance(self.image_id, str) or not self.image_id:
            raise MalformedManifest("image_id must be a non-empty string")
        if not isinstance(self.feature_file, str) or not self.feature_file:
            raise MalformedManifest("feature_file must be a non-empty string")
        for name in ("image_width", "image_height", "patch_size", "grid_h",
                     "grid_w", "num_layers", "feature_dim"):
            _require_positive_int(getattr(self, name), name)
        if self.grid_h != self.image_height // self.patch_size:
            raise MalformedManifest(
                f"grid_h={self.grid_h} but floor({self.image_height}/{self.patch_size})"
                f"={self.image_height // self.patch_size}")
        if self.grid_w != self.image_width // self.patch_size:
            raise MalformedManifest(
                f"grid_w={self.grid_w} but floor({self.image_width}/{self.patch_size})"
                f"={self.image_width // self.patch_size}")

    @property
    def num_patches(self) -> int:
        return self.grid_h * self.grid_w


def read_manifest(path: str | Path) -> Manifest:
    """Parse and validate a manifest JSON file."""
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedManifest(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise MalformedManifest(f"{path}: top level must be a JSON object")
    keys = set(raw)
    expected = set(MANIFEST_FIELDS)
    if keys != expected:
        missing = sorted(expected - keys)
        extra = sorted(keys - expected)
        raise MalformedManifest(
            f"{path}: manifest keys wrong (missing={missing}, unexpected={extra})")
    return Manifest(**raw)


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    try:
        Path(path).write_text(json.dumps(asdict(manifest)) + "\n", "utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc


# --------------------------------------------------------------------------
# NPY subset
# --------------------------------------------------------------------------

def write_feature_array(array: np.ndarray, path: str | Path) -> None:
    """Write a (L, N, D) float32 tensor in the NPY v1.0 subset."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"feature tensor must be 3-d, got shape {arr.shape}")
    shape = tuple(int(s) for s in arr.shape)
    header = f"{{'descr': '<f4', 'fortran_order': False, 'shape': {shape!r}, }}"
    prefix_len = len(_NPY_MAGIC) + len(_NPY_VERSION) + 2
    pad = -(prefix_len + len(header) + 1) % _HEADER_ALIGN
    header_bytes = (header + " " * pad + "\n").encode("latin1")
    try:
        with open(path, "wb") as fh:
            fh.write(_NPY_MAGIC)
            fh.write(_NPY_VERSION)
            fh.write(struct.pack("<H", len(header_bytes)))
            fh.write(header_bytes)
            fh.write(arr.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write feature file {path}: {exc}") from exc


def read_feature_array(path: str | Path) -> np.ndarray:
    """Read a feature file, enforcing every structural rule of the format."""
    data = Path(path).read_bytes()
    if len(data) < 10 or data[:6] != _NPY_MAGIC:
        raise MalformedFeatureFile(f"{path}: bad magic bytes")
    if data[6:8] != _NPY_VERSION:
        raise MalformedFeatureFile(
            f"{path}: unsupported format version {data[6]}.{data[7]}")
    (header_len,) = struct.unpack("<H", data[8:10])
    header_end = 10 + header_len
    if len(data) < header_end:
        raise MalformedFeatureFile(f"{path}: truncated header")
    try:
        header = ast.literal_eval(data[10:header_end].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise MalformedFeatureFile(f"{path}: unparseable header ({exc})") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise MalformedFeatureFile(f"{path}: header must declare exactly "
                                   "descr/fortran_order/shape")
    if header["descr"] != "<f4":
        raise UnsupportedDtype(f"{path}: descr {header['descr']!r}, need '<f4'")
    if header["fortran_order"] is not False:
        raise MalformedFeatureFile(f"{path}: fortran_order must be False")
    shape = header["shape"]
    if (not isinstance(shape, tuple)
            or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0
                       for s in shape)):
        raise MalformedFeatureFile(f"{path}: bad shape {shape!r}")
    expected = 4 * math.prod(shape)
    payload = data[header_end:]
    if len(payload) != expected:
        raise MalformedFeatureFile(
            f"{path}: header declares shape {shape} ({expected} bytes) "
            f"but payload has {len(payload)} bytes")
    return np.frombuffer(payload, dtype="<f4").reshape(shape)


def read_features(manifest_path: str | Path) -> tuple[Manifest, np.ndarray]:
    """Read a manifest and its feature tensor, validating both.

    Returns the manifest and the (num_layers, num_patches, feature_dim)
    float32 tensor.  The feature path in the manifest is resolved relative
    to the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    try:
        arr = read_feature_array(manifest_path.parent / manifest.feature_file)
    except OSError as exc:
        raise IoFailure(
            f"{manifest.image_id}: cannot read feature file "
            f"{manifest.feature_file}: {exc}") from exc
    want = (manifest.num_layers, manifest.num_patches, manifest.feature_dim)
    if arr.shape != want:
        raise ShapeMismatch(
            f"{manifest.image_id}: tensor shape {arr.shape} but manifest implies {want}")
    if not np.isfinite(arr).all():
        raise NonFiniteFeature(f"{manifest.image_id}: feature tensor has NaN/Inf")
    return manifest, arr


# --------------------------------------------------------------------------
# Ground truth
# --------------------------------------------------------------------------

def _check_box(box: object, width: float, height: float, where: str) -> Box:
    if (not isinstance(box, (list, tuple)) or len(box) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       and math.isfinite(v) for v in box)):
        raise MalformedRecord(f"{where}: box must be four finite numbers, got {box!r}")
    x0, y0, x1, y1 = (float(v) for v in box)
    if x1 <= x0 or y1 <= y0:
        raise InvalidBox(f"{where}: degenerate box {box!r}")
    if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
        raise InvalidBox(f"{where}: box {box!r} outside [0,{width}]x[0,{height}]")
    return (x0, y0, x1, y1)


@dataclass(frozen=True)
class GroundTruth:
    """All annotated object boxes of one image, pixel coordinates."""

    image_id: str
    width: float
    height: float
    boxes: tuple[Box, ...]


def read_ground_truth(path: str | Path) -> dict[str, GroundTruth]:
    """Read a ground-truth JSONL file into a map keyed by image_id."""
    out: dict[str, GroundTruth] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{where}: {exc}") from exc
        try:
            image_id = raw["image_id"]
            width = float(raw["width"])
            height = float(raw["height"])
            raw_boxes = raw["boxes"]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"{where}: missing/ill-typed field ({exc})") from exc
        if not isinstance(image_id, str) or not image_id:
            raise MalformedRecord(f"{where}: image_id must be a non-empty string")
        if width <= 0 or height <= 0:
            raise MalformedRecord(f"{where}: nonpositive image dimensions")
        if not isinstance(raw_boxes, list) or not raw_boxes:
            raise MalformedRecord(f"{where}: boxes must be a non-empty list")
        boxes = tuple(_check_box(b, width, height, where) for b in raw_boxes)
        if image_id in out:
            raise DuplicateImageId(f"{where}: image_id {image_id!r} repeated")
        out[image_id] = GroundTruth(image_id, width, height, boxes)
    return out


def write_ground_truth(records: list[GroundTruth] | tuple[GroundTruth, ...],
                       path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for gt in records:
                fh.write(json.dumps({
                    "image_id": gt.image_id,
                    "width": gt.width,
                    "height": gt.height,
                    "boxes": [list(b) for b in gt.boxes],
                }) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write ground truth {path}: {exc}") from exc


# --------------------------------------------------------------------------
# Detection records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionRecord:
    """Final box for one image plus the refinement trace that produced it."""

    image_id: str
    box: Box
    iterations_run: int
    converged: bool
    center_trace: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.box
        if not all(math.isfinite(v) for v in self.box) or x1 <= x0 or y1 <= y0:
            raise MalformedRecord(f"{self.image_id}: degenerate box {self.box}")
        if self.iterations_run < 0:
            raise MalformedRecord(f"{self.image_id}: negative iterations_run")
        if len(self.center_trace) != self.iterations_run + 1:
            raise MalformedRecord(
                f"{self.image_id}: trace length {len(self.center_trace)} != "
                f"iterations_run + 1 = {self.iterations_run + 1}")


def write_detections(records: list[DetectionRecord] | tuple[DetectionRecord, ...],
                     path: str | Path) -> None:
    """Write detection records as JSON Lines, one record per line."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps({
                    "image_id": rec.image_id,
                    "box": list(rec.box),
                    "iterations_run": rec.iterations_run,
                    "converged": rec.converged,
                    "center_trace": [list(c) for c in rec.center_trace],
                }) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write detections {path}: {exc}") from exc


def read_detections(path: str | Path) -> list[DetectionRecord]:
    """Read back a detections JSONL file (inverse of write_detections)."""
    out = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{where}: {exc}") from exc
        try:
            out.append(DetectionRecord(
                image_id=raw["image_id"],
                box=tuple(float(v) for v in raw["box"]),
                iterations_run=int(raw["iterations_run"]),
                converged=bool(raw["converged"]),
                center_trace=tuple((float(x), float(y))
                                   for x, y in raw["center_trace"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"{where}: missing/ill-typed field ({exc})") from exc
    return out
