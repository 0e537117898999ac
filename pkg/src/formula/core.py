"""Multi-layer fusion and foreground guidance with self-iteration.

Fusion is a convex combination of per-layer key features, index 0 being
the last transformer layer.  Guidance loops the chosen head: take the
current mask's centroid, drop a 2D Gaussian there, reweight the original
intermediate map by the (peak-normalized) Gaussian, extract again, and
stop once the squared centroid shift between consecutive iterations falls
below tau or the iteration cap is hit.

Coordinate frames are deliberately split.  Centroids and the tau test use
patch-grid units, so tau = sqrt(2) means "the center moved less than
about 1.19 patches".  The Gaussian distance uses per-axis normalized
coordinates (col / grid_w, row / grid_h), so sigma is scale-free across
image sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyForeground, EmptyMask, GridMismatch, LengthMismatch
from .feature_io import DetectionRecord, Manifest
from .heads import (
    Head,
    HeadContext,
    IntermediateMap,
    ObjectMask,
    build_intermediate_map,
    extract_mask,
    mask_to_box,
)

DEFAULT_SIGMA = {Head.LOST: 0.1, Head.TOKENCUT: 1.0}
DEFAULT_TAU = math.sqrt(2.0)
DEFAULT_MAX_ITERATIONS = 4
FUSION_SPAN = 4

# Per-dataset layer weights, index 0 = last layer.
PRESET_FUSION_WEIGHTS: dict[tuple[str, Head], tuple[float, ...]] = {
    ("voc07", Head.LOST): (0.2, 0.1, 0.1, 0.6),
    ("voc07", Head.TOKENCUT): (0.3, 0.5, 0.1, 0.1),
    ("voc12", Head.LOST): (0.1, 0.1, 0.2, 0.6),
    ("voc12", Head.TOKENCUT): (0.1, 0.6, 0.1, 0.2),
    ("coco_20k", Head.LOST): (0.0, 0.2, 0.3, 0.5),
    ("coco_20k", Head.TOKENCUT): (0.2, 0.7, 0.0, 0.1),
}

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class FusionWeights:
    """Per-layer weights alpha, nonnegative and summing to one."""

    alphas: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.alphas:
            raise ValueError("need at least one fusion weight")
        if any(not math.isfinite(a) or a < 0 for a in self.alphas):
            raise ValueError(f"weights must be finite and nonnegative: {self.alphas}")
        total = math.fsum(self.alphas)
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {total!r}")

    @classmethod
    def normalized(cls, raw: list[float] | tuple[float, ...]) -> "FusionWeights":
        """Scale nonnegative raw weights so they sum to one."""
        if not raw or any(not math.isfinite(a) or a < 0 for a in raw):
            raise ValueError(f"raw weights must be finite and nonnegative: {raw}")
        total = math.fsum(raw)
        if total <= 0:
            raise ValueError("raw weights sum to zero")
        return cls(tuple(a / total for a in raw))

    @classmethod
    def uniform(cls, num_layers: int, span: int = FUSION_SPAN) -> "FusionWeights":
        """Uniform weights over the last min(span, num_layers) layers."""
        k = min(span, num_layers)
        return cls.normalized(tuple([1.0] * k + [0.0] * (num_layers - k)))

    @classmethod
    def last_layer_only(cls, num_layers: int) -> "FusionWeights":
        return cls(tuple([1.0] + [0.0] * (num_layers - 1)))


@dataclass(frozen=True)
class GuidanceConfig:
    """Knobs of the self-iteration loop."""

    sigma: float
    tau: float = DEFAULT_TAU
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be >= 0, got {self.max_iterations}")


@dataclass(frozen=True)
class Center:
    """Object center in patch-grid units: x is the column, y the row."""

    x: float
    y: float


@dataclass(frozen=True)
class ProbabilityMap:
    """Positive per-patch Gaussian weights, peak normalized to 1."""

    grid_h: int
    grid_w: int
    values: np.ndarray


def fuse_layers(stack: np.ndarray, weights: FusionWeights) -> np.ndarray:
    """Weighted sum of per-layer features: f = sum_l alpha_l k_l."""
    arr = np.asarray(stack)
    if arr.ndim != 3:
        raise ValueError(f"feature stack must be 3-d, got shape {arr.shape}")
    if arr.shape[0] != len(weights.alphas):
        raise LengthMismatch(
            f"{len(weights.alphas)} weights for {arr.shape[0]} layers")
    alphas = np.asarray(weights.alphas, dtype=np.float64)
    return np.einsum("l,lnd->nd", alphas, arr.astype(np.float64))


def mask_centroid(mask: ObjectMask) -> Center:
    """Mean (col, row) of the foreground patches."""
    rows, cols = np.nonzero(mask.bits)
    if rows.size == 0:
        raise EmptyMask("centroid of an empty mask")
    return Center(x=float(cols.mean()), y=float(rows.mean()))


def gaussian_raw(center: Center, sigma: float, grid_h: int,
                 grid_w: int) -> np.ndarray:
    """Unnormalized Gaussian over the grid, (1/2 pi sigma^2) exp(-d^2/2 sigma^2).

    Distances are per-axis normalized: a patch at (row, col) sits at
    (col / grid_w, row / grid_h) and the center is normalized the same way.
    """
    d2 = _normalized_sq_distances(center, sigma, grid_h, grid_w)
    return np.exp(-d2 / (2.0 * sigma * sigma)) / (2.0 * math.pi * sigma * sigma)


def gaussian_map(center: Center, sigma: float, grid_h: int,
                 grid_w: int) -> ProbabilityMap:
    """Peak-normalized Gaussian; strictly positive everywhere."""
    d2 = _normalized_sq_distances(center, sigma, grid_h, grid_w)
    # dividing raw by its max cancels the prefactor; shifting the exponent
    # instead keeps the far tail from underflowing to exactly zero
    values = np.exp(-(d2 - d2.min()) / (2.0 * sigma * sigma))
    np.maximum(values, np.finfo(np.float64).tiny, out=values)
    return ProbabilityMap(grid_h, grid_w, values)


def _normalized_sq_distances(center: Center, sigma: float, grid_h: int,
                             grid_w: int) -> np.ndarray:
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    dx = (np.arange(grid_w, dtype=np.float64) - center.x) / grid_w
    dy = (np.arange(grid_h, dtype=np.float64) - center.y) / grid_h
    return dy[:, None] ** 2 + dx[None, :] ** 2


def reweight(imap: IntermediateMap, prob: ProbabilityMap) -> IntermediateMap:
    """Hadamard product of the intermediate map with the probability map."""
    if (imap.grid_h, imap.grid_w) != (prob.grid_h, prob.grid_w):
        raise GridMismatch(
            f"map grid {imap.grid_h}x{imap.grid_w} vs "
            f"probability grid {prob.grid_h}x{prob.grid_w}")
    return IntermediateMap(imap.grid_h, imap.grid_w,
                           imap.values * prob.values, imap.kind)


def _full_grid_mask(grid_h: int, grid_w: int) -> ObjectMask:
    return ObjectMask(grid_h, grid_w, np.ones((grid_h, grid_w), dtype=np.uint8))


def foreground_guided_detect(
    features: np.ndarray,
    head: Head,
    cfg: GuidanceConfig,
    manifest: Manifest,
) -> DetectionRecord:
    """Run one head under iterative foreground guidance.

    The similarity graph and the base intermediate map are built once; each
    iteration reweights the base map by a Gaussian centered on the previous
    mask's centroid and re-extracts.  The loop stops when the squared
    centroid shift drops below tau (converged) or after max_iterations.
    An EmptyForeground from the head falls back to the previous mask (the
    full grid if the first extraction fails) without claiming convergence.
    """
    grid_h, grid_w = manifest.grid_h, manifest.grid_w
    base_map, ctx = build_intermediate_map(features, grid_h, grid_w, head)

    converged = False
    try:
        mask = extract_mask(base_map, ctx)
    except EmptyForeground:
        mask = _full_grid_mask(grid_h, grid_w)
        center = mask_centroid(mask)
        return DetectionRecord(
            image_id=manifest.image_id,
            box=mask_to_box(mask, manifest),
            iterations_run=0,
            converged=False,
            center_trace=((center.x, center.y),))

    center = mask_centroid(mask)
    trace = [(center.x, center.y)]
    iterations_run = 0
    for _ in range(cfg.max_iterations):
        prob = gaussian_map(center, cfg.sigma, grid_h, grid_w)
        try:
            new_mask = extract_mask(reweight(base_map, prob), ctx)
        except EmptyForeground:
            break
        new_center = mask_centroid(new_mask)
        iterations_run += 1
        trace.append((new_center.x, new_center.y))
        shift_sq = (new_center.x - center.x) ** 2 + (new_center.y - center.y) ** 2
        mask, center = new_mask, new_center
        if shift_sq < cfg.tau:
            converged = True
            break

    return DetectionRecord(
        image_id=manifest.image_id,
        box=mask_to_box(mask, manifest),
        iterations_run=iterations_run,
        converged=converged,
        center_trace=tuple(trace))
