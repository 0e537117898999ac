"""Minimal vision transformer exposing per-layer key projections.

The architecture and parameter names follow the common self-distilled ViT
layout (patch_embed.proj, cls_token, pos_embed, blocks.N.attn.qkv, ...), so
publicly distributed backbone state dicts load directly.  Inference returns
the key projections of the last L attention layers with the class token
dropped: each attention block computes qkv as one linear map, and the key
slice reshaped back across heads equals a plain linear projection of the
normalized block input.
"""

from __future__ import annotations

import math
import pickle
import zipfile
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from .errors import CheckpointError, ConfigError

# head count is not recoverable from tensor shapes; small self-distilled
# backbones ship with 6 heads, which callers can override
DEFAULT_NUM_HEADS = 6

LAYERNORM_EPS = 1e-6


@dataclass(frozen=True)
class ViTConfig:
    """Shape parameters of a loaded backbone."""

    patch_size: int
    dim: int
    depth: int
    num_heads: int
    mlp_hidden: int
    native_grid: int

    def __post_init__(self) -> None:
        if self.dim % self.num_heads != 0:
            raise ConfigError(
                f"dim {self.dim} not divisible by {self.num_heads} heads")


class Attention(nn.Module):
    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3, bias=True)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (block output, key features concatenated across heads)."""
        b, n, d = x.shape
        head_dim = d // self.num_heads
        qkv = (self.qkv(x)
               .reshape(b, n, 3, self.num_heads, head_dim)
               .permute(2, 0, 3, 1, 4))
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        keys = k.transpose(1, 2).reshape(b, n, d)
        return self.proj(out), keys


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class Block(nn.Module):
    def __init__(self, dim: int, num_heads: int, mlp_hidden: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=LAYERNORM_EPS)
        self.attn = Attention(dim, num_heads)
        self.norm2 = nn.LayerNorm(dim, eps=LAYERNORM_EPS)
        self.mlp = Mlp(dim, mlp_hidden)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        attn_out, keys = self.attn(self.norm1(x))
        x = x + attn_out
        x = x + self.mlp(self.norm2(x))
        return x, keys


class PatchEmbed(nn.Module):
    def __init__(self, patch_size: int, dim: int):
        super().__init__()
        self.proj = nn.Conv2d(3, dim, kernel_size=patch_size,
                              stride=patch_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.proj(x).flatten(2).transpose(1, 2)


class VisionTransformer(nn.Module):
    def __init__(self, config: ViTConfig):
        super().__init__()
        self.config = config
        self.patch_embed = PatchEmbed(config.patch_size, config.dim)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, config.dim))
        self.pos_embed = nn.Parameter(
            torch.zeros(1, config.native_grid ** 2 + 1, config.dim))
        self.blocks = nn.ModuleList(
            Block(config.dim, config.num_heads, config.mlp_hidden)
            for _ in range(config.depth))
        self.norm = nn.LayerNorm(config.dim, eps=LAYERNORM_EPS)
        self._init_weights()

    def _init_weights(self) -> None:
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        nn.init.trunc_normal_(self.cls_token, std=0.02)
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.trunc_normal_(module.weight, std=0.02)
                nn.init.zeros_(module.bias)

    def _positional(self, grid_h: int, grid_w: int) -> torch.Tensor:
        """Pos embedding for an arbitrary grid, bicubic off the native one."""
        native = self.config.native_grid
        if (grid_h, grid_w) == (native, native):
            return self.pos_embed
        cls_pos = self.pos_embed[:, :1]
        patch_pos = self.pos_embed[:, 1:].reshape(
            1, native, native, self.config.dim).permute(0, 3, 1, 2)
        patch_pos = nn.functional.interpolate(
            patch_pos, size=(grid_h, grid_w), mode="bicubic",
            align_corners=False)
        patch_pos = patch_pos.permute(0, 2, 3, 1).reshape(
            1, grid_h * grid_w, self.config.dim)
        return torch.cat([cls_pos, patch_pos], dim=1)

    def forward_keys(self, pixels: torch.Tensor, layers: int) -> torch.Tensor:
        """Key features of the last `layers` blocks, class token removed.

        pixels: (1, 3, H, W) with H and W multiples of the patch size.
        Returns (layers, grid_h * grid_w, dim) with index 0 the last block.
        """
        depth = self.config.depth
        if not 1 <= layers <= depth:
            raise ConfigError(
                f"requested {layers} layers from a depth-{depth} model")
        _, _, height, width = pixels.shape
        patch = self.config.patch_size
        if height % patch or width % patch:
            raise ConfigError(
                f"input {width}x{height} not a multiple of patch {patch}")
        grid_h, grid_w = height // patch, width // patch

        x = self.patch_embed(pixels)
        cls = self.cls_token.expand(x.shape[0], -1, -1)
        x = torch.cat([cls, x], dim=1) + self._positional(grid_h, grid_w)

        collected = []
        for block in self.blocks:
            x, keys = block(x)
            collected.append(keys)
        # deepest layer first, class token row dropped
        wanted = collected[depth - layers:][::-1]
        return torch.stack([keys[0, 1:] for keys in wanted])


def _strip_prefixes(state_dict: dict) -> dict:
    out = {}
    for key, value in state_dict.items():
        for prefix in ("module.", "backbone."):
            if key.startswith(prefix):
                key = key[len(prefix):]
        out[key] = value
    return out


def config_from_state_dict(state_dict: dict,
                           num_heads: int | None = None) -> ViTConfig:
    try:
        patch_size = state_dict["patch_embed.proj.weight"].shape[-1]
        dim = state_dict["cls_token"].shape[-1]
        num_positions = state_dict["pos_embed"].shape[1] - 1
        mlp_hidden = state_dict["blocks.0.mlp.fc1.weight"].shape[0]
    except KeyError as exc:
        raise CheckpointError(f"state dict missing tensor {exc}") from exc
    depth = 1 + max(int(key.split(".")[1]) for key in state_dict
                    if key.startswith("blocks."))
    native_grid = math.isqrt(num_positions)
    if native_grid ** 2 != num_positions:
        raise CheckpointError(
            f"pos_embed carries {num_positions} patch positions, not square")
    return ViTConfig(patch_size=patch_size, dim=dim, depth=depth,
                     num_heads=num_heads or DEFAULT_NUM_HEADS,
                     mlp_hidden=mlp_hidden, native_grid=native_grid)


def load_checkpoint(path: str | Path,
                    num_heads: int | None = None) -> VisionTransformer:
    """Build a model from a saved backbone.

    Accepts either a bare state dict or a dict with a "state_dict" entry;
    a stored "num_heads" entry wins over the default but not over an
    explicit argument.
    """
    try:
        payload = torch.load(Path(path), map_location="cpu",
                             weights_only=True)
    except (OSError, RuntimeError, ValueError, EOFError,
            pickle.UnpicklingError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot load checkpoint {path}: {exc}") from exc
    stored_heads = None
    if isinstance(payload, dict) and "state_dict" in payload:
        stored_heads = payload.get("num_heads")
        payload = payload["state_dict"]
    if not isinstance(payload, dict) or not payload:
        raise CheckpointError(f"checkpoint {path} holds no state dict")
    state_dict = _strip_prefixes(payload)
    config = config_from_state_dict(state_dict,
                                    num_heads or stored_heads)
    model = VisionTransformer(config)
    try:
        model.load_state_dict(state_dict, strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"state dict mismatch for {path}: {exc}") from exc
    model.eval()
    return model


def save_checkpoint(model: VisionTransformer, path: str | Path) -> None:
    torch.save({"state_dict": model.state_dict(),
                "num_heads": model.config.num_heads}, Path(path))
