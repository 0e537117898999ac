"""Annotation converters: VOC XML and COCO JSON to ground-truth JSONL.

Output lines follow the evaluation schema: {"image_id", "width", "height",
"boxes": [[x0, y0, x1, y1], ...]} with zero-based float pixel coordinates.
VOC boxes arrive 1-based inclusive, so (xmin, ymin, xmax, ymax) maps to
(xmin - 1, ymin - 1, xmax, ymax); COCO boxes arrive as (x, y, w, h) and map
to (x, y, x + w, y + h).  Images without any object are skipped with a
warning since a localization score is undefined for them.
"""

from __future__ import annotations

import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

from .errors import AnnotationError

log = logging.getLogger(__name__)

FORMATS = ("voc-xml", "coco-json")


@dataclass(frozen=True)
class ImageAnnotation:
    image_id: str
    width: float
    height: float
    boxes: tuple[tuple[float, float, float, float], ...]


def _require(node, tag: str, where: str):
    child = node.find(tag)
    if child is None or child.text is None:
        raise AnnotationError(f"{where}: missing <{tag}>")
    return child.text


def parse_voc_xml(path: Path) -> ImageAnnotation:
    try:
        root = ET.parse(path).getroot()
    except (ET.ParseError, OSError) as exc:
        raise AnnotationError(f"cannot parse {path}: {exc}") from exc
    where = str(path)
    image_id = Path(_require(root, "filename", where)).stem
    size = root.find("size")
    if size is None:
        raise AnnotationError(f"{where}: missing <size>")
    width = float(_require(size, "width", where))
    height = float(_require(size, "height", where))
    boxes = []
    for obj in root.iter("object"):
        bndbox = obj.find("bndbox")
        if bndbox is None:
            raise AnnotationError(f"{where}: <object> without <bndbox>")
        try:
            xmin = float(_require(bndbox, "xmin", where))
            ymin = float(_require(bndbox, "ymin", where))
            xmax = float(_require(bndbox, "xmax", where))
            ymax = float(_require(bndbox, "ymax", where))
        except ValueError as exc:
            raise AnnotationError(f"{where}: non-numeric bndbox") from exc
        # 1-based inclusive corners to zero-based exclusive-style floats
        boxes.append((xmin - 1.0, ymin - 1.0, xmax, ymax))
    return ImageAnnotation(image_id, width, height, tuple(boxes))


def parse_coco_json(path: Path) -> list[ImageAnnotation]:
    try:
        blob = json.loads(Path(path).read_text("utf-8"))
        images = {img["id"]: img for img in blob["images"]}
        grouped: dict = {img_id: [] for img_id in images}
        for ann in blob["annotations"]:
            x, y, w, h = (float(v) for v in ann["bbox"])
            grouped[ann["image_id"]].append((x, y, x + w, y + h))
    except (OSError, json.JSONDecodeError, KeyError, TypeError,
            ValueError) as exc:
        raise AnnotationError(f"cannot parse {path}: {exc}") from exc
    out = []
    for img_id, img in sorted(images.items(), key=lambda kv: str(kv[0])):
        out.append(ImageAnnotation(
            image_id=Path(img["file_name"]).stem,
            width=float(img["width"]),
            height=float(img["height"]),
            boxes=tuple(grouped[img_id])))
    return out


def convert(format_name: str, in_dir: Path,
            out_path: Path) -> tuple[int, list[tuple[Path, str]]]:
    """Convert every annotation file under in_dir; returns (lines written,
    per-file failures)."""
    if format_name not in FORMATS:
        raise AnnotationError(f"unknown format {format_name!r}")
    pattern = "*.xml" if format_name == "voc-xml" else "*.json"
    paths = sorted(Path(in_dir).glob(pattern))
    annotations: dict[str, ImageAnnotation] = {}
    failures: list[tuple[Path, str]] = []
    for path in paths:
        try:
            parsed = ([parse_voc_xml(path)] if format_name == "voc-xml"
                      else parse_coco_json(path))
            for ann in parsed:
                if ann.image_id in annotations:
                    raise AnnotationError(
                        f"duplicate image_id {ann.image_id!r} in {path}")
                annotations[ann.image_id] = ann
        except AnnotationError as exc:
            log.error("skipping %s: %s", path, exc)
            failures.append((path, str(exc)))

    lines = []
    for image_id in sorted(annotations):
        ann = annotations[image_id]
        if not ann.boxes:
            log.warning("skipping %s: no objects annotated", image_id)
            continue
        lines.append(json.dumps({
            "image_id": ann.image_id,
            "width": ann.width,
            "height": ann.height,
            "boxes": [list(box) for box in ann.boxes],
        }))
    Path(out_path).write_text("".join(line + "\n" for line in lines), "utf-8")
    return len(lines), failures
