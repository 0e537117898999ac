"""The two saliency heads: inverse-degree (Lost) and Fiedler (TokenCut).

Both heads turn an N x D patch-feature tensor into an intermediate map
over the patch grid and then extract a binary foreground mask from it.
The similarity graph and everything derived from raw features live in a
HeadContext built once per image; iteration-time reweighting only touches
the intermediate map, never the graph.

Lost: binarized adjacency at cosine >= 0, degree counts the self loop,
map = inverse degree.  The seed is the map argmax; the expansion set is
the budgeted top of the map restricted to patches adjacent to the seed;
foreground is every patch whose summed raw similarity to the expansion
set is positive; the mask is the 4-connected component of the seed.

TokenCut: weights 1 where cosine >= 0.2 else 1e-5, map = second-smallest
generalized eigenvector.  Bipartition at the mean map value; foreground
is the side holding the largest-magnitude entry; the mask is that entry's
4-connected component.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import EmptyForeground, EmptyMask
from .feature_io import Box, Manifest
from .numerics import cosine_similarity_matrix, second_smallest_generalized_eigpair

DEFAULT_EXPANSION_BUDGET = 100
DEFAULT_TOKENCUT_SIM_THRESHOLD = 0.2
DEFAULT_TOKENCUT_EPSILON = 1e-5

FOUR_CONNECTED = np.array([[0, 1, 0],
                           [1, 1, 1],
                           [0, 1, 0]], dtype=np.int8)


class Head(Enum):
    LOST = "lost"
    TOKENCUT = "tokencut"


class MapKind(Enum):
    INVERSE_DEGREE = "inverse_degree"
    FIEDLER_VECTOR = "fiedler_vector"


@dataclass(frozen=True)
class IntermediateMap:
    """Per-patch saliency values on the grid, before mask extraction."""

    grid_h: int
    grid_w: int
    values: np.ndarray
    kind: MapKind

    def scaled(self, c: float) -> "IntermediateMap":
        return replace(self, values=self.values * c)


@dataclass(frozen=True)
class ObjectMask:
    """Binary foreground mask on the patch grid."""

    grid_h: int
    grid_w: int
    bits: np.ndarray

    @property
    def num_foreground(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class HeadContext:
    """Graph-side state built once per image and reused across iterations."""

    head: Head
    similarity: np.ndarray
    binarized_adjacency: np.ndarray
    expansion_budget: int


def build_intermediate_map(
    features: np.ndarray,
    grid_h: int,
    grid_w: int,
    head: Head,
    expansion_budget: int = DEFAULT_EXPANSION_BUDGET,
    tokencut_threshold: float = DEFAULT_TOKENCUT_SIM_THRESHOLD,
    tokencut_epsilon: float = DEFAULT_TOKENCUT_EPSILON,
) -> tuple[IntermediateMap, HeadContext]:
    """Build the head's intermediate map and its per-image context."""
    feats = np.asarray(features)
    n = grid_h * grid_w
    if feats.ndim != 2 or feats.shape[0] != n:
        raise ValueError(
            f"features shape {feats.shape} does not match grid {grid_h}x{grid_w}")
    sim = cosine_similarity_matrix(feats)
    adjacency = (sim >= 0.0).astype(np.float64)
    ctx = HeadContext(head=head, similarity=sim, binarized_adjacency=adjacency,
                      expansion_budget=expansion_budget)

    if head is Head.LOST:
        deg = adjacency.sum(axis=1)
        values = (1.0 / deg).reshape(grid_h, grid_w)
        kind = MapKind.INVERSE_DEGREE
    else:
        if n == 1:
            values = np.ones((1, 1))
        else:
            weights = np.where(sim >= tokencut_threshold, 1.0, tokencut_epsilon)
            result = second_smallest_generalized_eigpair(weights)
            values = result.eigenvector.reshape(grid_h, grid_w)
        kind = MapKind.FIEDLER_VECTOR
    return IntermediateMap(grid_h, grid_w, values, kind), ctx


def _component_containing(foreground: np.ndarray, anchor_flat: int) -> np.ndarray:
    labels, _ = ndimage.label(foreground, structure=FOUR_CONNECTED)
    anchor_label = labels.flat[anchor_flat]
    if anchor_label == 0:
        raise EmptyForeground("anchor patch not in any foreground component")
    return (labels == anchor_label).astype(np.uint8)


def _extract_lost(imap: IntermediateMap, ctx: HeadContext) -> ObjectMask:
    flat = imap.values.ravel()
    seed = int(np.argmax(flat))
    candidates = np.flatnonzero(ctx.binarized_adjacency[seed] > 0.0)
    # descending map value, ties to the lowest linear index
    order = candidates[np.argsort(-flat[candidates], kind="stable")]
    expansion = order[:ctx.expansion_budget]
    score = ctx.similarity[:, expansion].sum(axis=1)
    positive = (score > 0.0).reshape(imap.grid_h, imap.grid_w)
    if not positive.flat[seed]:
        raise EmptyForeground("seed patch has nonpositive expansion score")
    return ObjectMask(imap.grid_h, imap.grid_w,
                      _component_containing(positive, seed))


def _extract_tokencut(imap: IntermediateMap) -> ObjectMask:
    vals = imap.values
    anchor = int(np.argmax(np.abs(vals.ravel())))
    high_side = vals >= vals.mean()
    foreground = high_side if high_side.flat[anchor] else ~high_side
    return ObjectMask(imap.grid_h, imap.grid_w,
                      _component_containing(foreground, anchor))


def extract_mask(imap: IntermediateMap, ctx: HeadContext) -> ObjectMask:
    """Extract the binary foreground mask from an intermediate map."""
    if not np.isfinite(imap.values).all():
        raise ValueError("intermediate map has non-finite values")
    if ctx.head is Head.LOST:
        return _extract_lost(imap, ctx)
    return _extract_tokencut(imap)


def mask_to_box(mask: ObjectMask, manifest: Manifest) -> Box:
    """Tight pixel bounding box of the foreground patches."""
    rows, cols = np.nonzero(mask.bits)
    if rows.size == 0:
        raise EmptyMask("cannot box an empty mask")
    p = manifest.patch_size
    x0 = float(cols.min() * p)
    y0 = float(rows.min() * p)
    x1 = float(min((cols.max() + 1) * p, manifest.image_width))
    y1 = float(min((rows.max() + 1) * p, manifest.image_height))
    return (x0, y0, x1, y1)


def uniform_scale_invariance_check(imap: IntermediateMap, c: float,
                                   ctx: HeadContext) -> bool:
    """Whether extract_mask(c * map) matches extract_mask(map) bitwise."""
    if c <= 0:
        raise ValueError(f"scale must be positive, got {c}")
    base = extract_mask(imap, ctx)
    scaled = extract_mask(imap.scaled(c), ctx)
    return bool(np.array_equal(base.bits, scaled.bits))
