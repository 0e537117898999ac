"""Batch feature extraction: images in, per-image manifest + NPY out.

Each image is cropped top-left to the largest patch multiple, normalized
with the usual ImageNet statistics, and pushed through the backbone once.
The manifest keeps the original image dimensions; the grid recorded there
equals the floor of those dimensions over the patch size, which is exactly
the cropped extent, so downstream readers see a consistent pair.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, ImageLoadError
from .model import VisionTransformer, load_checkpoint

log = logging.getLogger(__name__)

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

DEFAULT_LAYERS = 4


@dataclass(frozen=True)
class ExtractorConfig:
    """One extraction batch: which checkpoint, which images, where to."""

    checkpoint: Path
    images: tuple[Path, ...]
    out_dir: Path
    layers: int = DEFAULT_LAYERS
    crop_to_patch_multiple: bool = True
    num_heads: int | None = None

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")


def load_pixels(path: Path, patch_size: int,
                crop: bool = True) -> tuple[torch.Tensor, int, int]:
    """Decode an image into a normalized (1, 3, H, W) tensor.

    Returns the tensor plus the original width and height.  With crop
    enabled the tensor is the top-left patch-multiple region; without it
    the image must already be an exact multiple.
    """
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageLoadError(f"cannot decode image {path}: {exc}") from exc
    orig_w, orig_h = rgb.size
    crop_w = (orig_w // patch_size) * patch_size
    crop_h = (orig_h // patch_size) * patch_size
    if crop_w == 0 or crop_h == 0:
        raise ImageLoadError(
            f"image {path} is {orig_w}x{orig_h}, smaller than one "
            f"{patch_size}px patch")
    if not crop and (crop_w, crop_h) != (orig_w, orig_h):
        raise ImageLoadError(
            f"image {path} is {orig_w}x{orig_h}, not a multiple of patch "
            f"{patch_size} and cropping is disabled")
    if (crop_w, crop_h) != (orig_w, orig_h):
        rgb = rgb.crop((0, 0, crop_w, crop_h))

    array = np.asarray(rgb, dtype=np.float32) / 255.0
    array = (array - IMAGENET_MEAN) / IMAGENET_STD
    tensor = torch.from_numpy(array.astype(np.float32)).permute(2, 0, 1)
    return tensor.unsqueeze(0), orig_w, orig_h


def extract_image(model: VisionTransformer, image_path: Path, layers: int,
                  out_dir: Path, crop: bool = True) -> Path:
    """Extract one image; writes <stem>.npy and <stem>.json, returns the
    manifest path."""
    patch = model.config.patch_size
    pixels, orig_w, orig_h = load_pixels(image_path, patch, crop)
    with torch.inference_mode():
        keys = model.forward_keys(pixels, layers)
    features = keys.numpy().astype(np.float32)
    if not np.isfinite(features).all():
        raise ImageLoadError(f"non-finite features for {image_path}")

    image_id = image_path.stem
    out_dir.mkdir(parents=True, exist_ok=True)
    feature_file = f"{image_id}.npy"
    np.save(out_dir / feature_file, features)

    manifest = {
        "image_id": image_id,
        "image_width": orig_w,
        "image_height": orig_h,
        "patch_size": patch,
        "grid_h": orig_h // patch,
        "grid_w": orig_w // patch,
        "num_layers": layers,
        "feature_dim": model.config.dim,
        "feature_file": feature_file,
    }
    manifest_path = out_dir / f"{image_id}.json"
    manifest_path.write_text(json.dumps(manifest) + "\n", "utf-8")
    return manifest_path


def extract(config: ExtractorConfig) -> tuple[list[Path], list[tuple[Path, str]]]:
    """Run the whole batch; returns (written manifests, per-file failures)."""
    model = load_checkpoint(config.checkpoint, config.num_heads)
    if config.layers > model.config.depth:
        raise ConfigError(
            f"requested {config.layers} layers from a depth-"
            f"{model.config.depth} model")
    written = []
    failures = []
    for image_path in config.images:
        try:
            written.append(extract_image(
                model, Path(image_path), config.layers, Path(config.out_dir),
                config.crop_to_patch_multiple))
        except (ImageLoadError, ConfigError) as exc:
            log.error("skipping %s: %s", image_path, exc)
            failures.append((Path(image_path), str(exc)))
    return written, failures
