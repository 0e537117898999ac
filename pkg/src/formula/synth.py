"""Synthetic planted-object scenes for tests, fixtures and benchmarks.

A scene is a patch grid whose background patches draw features near one
unit direction and whose foreground patches draw near another, with a
configurable cosine separation between the two directions and isotropic
Gaussian noise on top.  One rectangle is the planted object (and becomes
the ground-truth box); optional extra rectangles draw from the foreground
direction too, acting as salient distractors without ground truth.

Everything is a pure function of (spec, seed), so fixture files are
byte-for-byte reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .feature_io import (
    GroundTruth,
    Manifest,
    write_feature_array,
    write_ground_truth,
    write_manifest,
)


@dataclass(frozen=True)
class Rect:
    """Patch-grid rectangle: top-left (row0, col0), extent (rows, cols)."""

    row0: int
    col0: int
    rows: int
    cols: int


@dataclass(frozen=True)
class SceneSpec:
    image_id: str
    grid_h: int
    grid_w: int
    object_rect: Rect
    extra_foreground: tuple[Rect, ...] = ()
    patch_size: int = 16
    num_layers: int = 4
    feature_dim: int = 48
    separation_deg: float = 180.0
    noise: float = 0.0

    def __post_init__(self) -> None:
        if not self.image_id:
            raise InvalidSpec("image_id must be non-empty")
        if self.grid_h < 1 or self.grid_w < 1:
            raise InvalidSpec(f"grid {self.grid_h}x{self.grid_w} invalid")
        if self.patch_size < 1 or self.num_layers < 1:
            raise InvalidSpec("patch_size and num_layers must be positive")
        if self.feature_dim < 2:
            raise InvalidSpec("feature_dim must be at least 2")
        if not (0.0 < self.separation_deg <= 180.0):
            raise InvalidSpec(
                f"separation must be in (0, 180] degrees, got {self.separation_deg}")
        if not (math.isfinite(self.noise) and self.noise >= 0.0):
            raise InvalidSpec(f"noise must be a nonnegative real, got {self.noise}")
        for rect in (self.object_rect, *self.extra_foreground):
            if rect.rows < 1 or rect.cols < 1:
                raise InvalidSpec(f"rect {rect} has nonpositive extent")
            if (rect.row0 < 0 or rect.col0 < 0
                    or rect.row0 + rect.rows > self.grid_h
                    or rect.col0 + rect.cols > self.grid_w):
                raise InvalidSpec(f"rect {rect} outside grid "
                                  f"{self.grid_h}x{self.grid_w}")


def _foreground_bits(spec: SceneSpec) -> np.ndarray:
    bits = np.zeros((spec.grid_h, spec.grid_w), dtype=bool)
    for rect in (spec.object_rect, *spec.extra_foreground):
        bits[rect.row0:rect.row0 + rect.rows,
             rect.col0:rect.col0 + rect.cols] = True
    return bits


def generate_scene(spec: SceneSpec, seed: int) -> tuple[Manifest, np.ndarray, GroundTruth]:
    """Build (manifest, feature stack, ground truth) for one planted scene."""
    rng = np.random.default_rng(seed)
    g1, g2 = rng.standard_normal((2, spec.feature_dim))
    e1 = g1 / np.linalg.norm(g1)
    g2 = g2 - (g2 @ e1) * e1
    e2 = g2 / np.linalg.norm(g2)
    theta = math.radians(spec.separation_deg)
    background_dir = e1
    foreground_dir = math.cos(theta) * e1 + math.sin(theta) * e2

    fg = _foreground_bits(spec).ravel()
    n = spec.grid_h * spec.grid_w
    base = np.where(fg[:, None], foreground_dir[None, :], background_dir[None, :])
    stack = np.empty((spec.num_layers, n, spec.feature_dim), dtype=np.float32)
    for layer in range(spec.num_layers):
        noisy = base + spec.noise * rng.standard_normal((n, spec.feature_dim))
        stack[layer] = noisy.astype(np.float32)

    p = spec.patch_size
    manifest = Manifest(
        image_id=spec.image_id,
        image_width=spec.grid_w * p,
        image_height=spec.grid_h * p,
        patch_size=p,
        grid_h=spec.grid_h,
        grid_w=spec.grid_w,
        num_layers=spec.num_layers,
        feature_dim=spec.feature_dim,
        feature_file=f"{spec.image_id}.npy")
    rect = spec.object_rect
    box = (float(rect.col0 * p), float(rect.row0 * p),
           float((rect.col0 + rect.cols) * p), float((rect.row0 + rect.rows) * p))
    gt = GroundTruth(image_id=spec.image_id,
                     width=float(manifest.image_width),
                     height=float(manifest.image_height),
                     boxes=(box,))
    return manifest, stack, gt


def write_scene(spec: SceneSpec, seed: int,
                out_dir: str | Path) -> tuple[Path, Path, Path]:
    """Write manifest, feature file and a one-record ground-truth JSONL."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest, stack, gt = generate_scene(spec, seed)
    manifest_path = out / f"{spec.image_id}.json"
    features_path = out / manifest.feature_file
    gt_path = out / f"{spec.image_id}.gt.jsonl"
    write_manifest(manifest, manifest_path)
    write_feature_array(stack, features_path)
    write_ground_truth([gt], gt_path)
    return manifest_path, features_path, gt_path
