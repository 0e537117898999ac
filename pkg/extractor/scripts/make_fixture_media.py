"""Generate the committed extraction fixtures.

Renders ten procedural images (a textured object on a contrasting textured
background, rectangles and ellipses, a few sizes that are not patch
multiples), writes one VOC-style XML per image, builds a seeded random
backbone checkpoint, and runs the real extract and convert commands so the
committed fixtures are exactly what the tools produce.  Everything is
seeded; rerunning regenerates the same bytes.

Outputs:
  extractor/fixtures/images/*.png        source images
  extractor/fixtures/annotations/*.xml   source annotations
  extractor/fixtures/checkpoint.pth      frozen backbone
  fixtures/extracted/*.{json,npy}        per-image manifest + features
  fixtures/extracted/gt.jsonl            converted ground truth
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from vitfeat import ViTConfig, VisionTransformer, save_checkpoint
from vitfeat.cli import main

EXTRACTOR_ROOT = Path(__file__).resolve().parent.parent
MEDIA = EXTRACTOR_ROOT / "fixtures"
EXTRACTED = EXTRACTOR_ROOT.parent / "fixtures" / "extracted"

CHECKPOINT_SEED = 1234
RENDER_SEED = 2468

VOC_XML = """<annotation>
  <filename>{name}.png</filename>
  <size><width>{width}</width><height>{height}</height><depth>3</depth></size>
  <object>
    <name>object</name>
    <bndbox><xmin>{xmin}</xmin><ymin>{ymin}</ymin><xmax>{xmax}</xmax><ymax>{ymax}</ymax></bndbox>
  </object>
</annotation>
"""

# name, (width, height), object box (x0, y0, x1, y1), bg color, fg color,
# noise, shape, optional off-box distractor blob
SCENES = [
    ("ex0", (224, 224), (64, 80, 144, 160), (40, 45, 60), (210, 170, 60),
     6.0, "rect", None),
    ("ex1", (240, 208), (32, 32, 144, 144), (60, 70, 50), (190, 60, 70),
     5.0, "ellipse", None),
    ("ex2", (231, 217), (96, 32, 192, 112), (35, 35, 40), (80, 180, 210),
     8.0, "rect", None),
    ("ex3", (224, 240), (48, 112, 176, 224), (70, 55, 45), (230, 230, 90),
     6.0, "ellipse", None),
    ("ex4", (208, 208), (16, 16, 96, 96), (50, 60, 70), (220, 120, 160),
     10.0, "rect", None),
    ("ex5", (248, 232), (136, 120, 232, 200), (45, 50, 45), (150, 210, 90),
     7.0, "rect", None),
    ("ex6", (224, 224), (32, 96, 112, 192), (55, 45, 55), (200, 200, 200),
     6.0, "rect", ((160, 32, 192, 64), (120, 60, 40))),
    ("ex7", (216, 216), (40, 40, 184, 168), (40, 40, 45), (90, 140, 220),
     5.0, "ellipse", None),
    ("ex8", (224, 208), (144, 96, 208, 176), (65, 60, 50), (240, 90, 50),
     9.0, "rect", None),
    ("ex9", (240, 240), (80, 48, 144, 192), (50, 55, 65), (170, 100, 210),
     6.0, "rect", None),
]


def fill_region(img, box, color, noise, shape, rng):
    height, width = img.shape[:2]
    x0, y0, x1, y1 = box
    if shape == "rect":
        inside = np.zeros((height, width), dtype=bool)
        inside[y0:y1, x0:x1] = True
    else:
        yy, xx = np.mgrid[0:height, 0:width]
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        ex, ey = (x1 - x0) / 2.0, (y1 - y0) / 2.0
        inside = ((xx - cx) / ex) ** 2 + ((yy - cy) / ey) ** 2 <= 1.0
    textured = color + rng.normal(0.0, noise, size=img.shape)
    img[inside] = textured[inside]


def render(size, box, bg, fg, noise, shape, distractor, rng):
    width, height = size
    img = np.empty((height, width, 3), dtype=np.float64)
    img[:] = bg
    img += rng.normal(0.0, noise, size=img.shape)
    fill_region(img, box, fg, noise, shape, rng)
    if distractor is not None:
        blob_box, blob_color = distractor
        fill_region(img, blob_box, blob_color, noise, "ellipse", rng)
    return np.clip(img, 0.0, 255.0).astype(np.uint8)


def write_media() -> None:
    images_dir = MEDIA / "images"
    ann_dir = MEDIA / "annotations"
    images_dir.mkdir(parents=True, exist_ok=True)
    ann_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(RENDER_SEED)
    for name, size, box, bg, fg, noise, shape, distractor in SCENES:
        pixels = render(size, box, bg, fg, noise, shape, distractor, rng)
        Image.fromarray(pixels).save(images_dir / f"{name}.png")
        x0, y0, x1, y1 = box
        (ann_dir / f"{name}.xml").write_text(VOC_XML.format(
            name=name, width=size[0], height=size[1],
            xmin=x0 + 1, ymin=y0 + 1, xmax=x1, ymax=y1))

    torch.manual_seed(CHECKPOINT_SEED)
    config = ViTConfig(patch_size=16, dim=48, depth=4, num_heads=6,
                       mlp_hidden=192, native_grid=14)
    save_checkpoint(VisionTransformer(config), MEDIA / "checkpoint.pth")


def run_tools() -> int:
    images = sorted(str(p) for p in (MEDIA / "images").glob("*.png"))
    status = main(["extract", "--checkpoint", str(MEDIA / "checkpoint.pth"),
                   "--layers", "4", "--images", *images,
                   "--out", str(EXTRACTED)])
    if status:
        return status
    return main(["convert", "--format", "voc-xml",
                 "--in", str(MEDIA / "annotations"),
                 "--out", str(EXTRACTED / "gt.jsonl")])


if __name__ == "__main__":
    write_media()
    sys.exit(run_tools())
