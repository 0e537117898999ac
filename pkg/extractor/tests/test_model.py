"""Backbone behavior: key projections, checkpoint IO, config inference."""

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from vitfeat import (
    CheckpointError,
    ConfigError,
    ViTConfig,
    VisionTransformer,
    config_from_state_dict,
    load_checkpoint,
    save_checkpoint,
)

from conftest import TINY, build_tiny


def random_pixels(width, height, seed=0):
    torch.manual_seed(seed)
    return torch.randn(1, 3, height, width)


def oracle_first_block_keys(model, pixels):
    """Independent key computation for a depth-1 model.

    Embeds every patch separately (so token order is pinned to the loop,
    not to any reshape), prepends the class token, adds the positional
    embedding, then applies norm1 and the key third of the fused qkv map.
    """
    config = model.config
    patch = config.patch_size
    _, _, height, width = pixels.shape
    grid_h, grid_w = height // patch, width // patch

    conv = model.patch_embed.proj
    tokens = []
    for row in range(grid_h):
        for col in range(grid_w):
            window = pixels[:, :, row * patch:(row + 1) * patch,
                            col * patch:(col + 1) * patch]
            embedded = (window * conv.weight).sum(dim=(1, 2, 3)) + conv.bias
            tokens.append(embedded)
    x = torch.stack([model.cls_token[0, 0]] + tokens)
    x = x + model._positional(grid_h, grid_w)[0]

    block = model.blocks[0]
    normed = F.layer_norm(x, (config.dim,), block.norm1.weight,
                          block.norm1.bias, eps=1e-6)
    w_k = block.attn.qkv.weight[config.dim:2 * config.dim]
    b_k = block.attn.qkv.bias[config.dim:2 * config.dim]
    return normed[1:] @ w_k.T + b_k


class TestKeyFeatures:
    def test_matches_manual_key_projection(self):
        config = ViTConfig(patch_size=8, dim=16, depth=1, num_heads=2,
                           mlp_hidden=32, native_grid=4)
        model = build_tiny(seed=3, config=config)
        pixels = random_pixels(32, 24, seed=4)
        with torch.inference_mode():
            got = model.forward_keys(pixels, 1)[0]
        want = oracle_first_block_keys(model, pixels)
        assert torch.allclose(got, want, atol=1e-5)

    def test_shape_and_layer_count(self, tiny_model):
        pixels = random_pixels(40, 24)
        with torch.inference_mode():
            keys = tiny_model.forward_keys(pixels, 3)
        assert keys.shape == (3, 5 * 3, 16)

    def test_class_token_dropped(self, tiny_model):
        pixels = random_pixels(16, 16)
        with torch.inference_mode():
            keys = tiny_model.forward_keys(pixels, 1)
        assert keys.shape[1] == 4

    def test_index_zero_is_last_layer(self, tiny_model):
        pixels = random_pixels(32, 32)
        with torch.inference_mode():
            all_layers = tiny_model.forward_keys(pixels, 3)
            last_only = tiny_model.forward_keys(pixels, 1)
        assert torch.equal(all_layers[0], last_only[0])
        assert not torch.equal(all_layers[1], all_layers[0])

    def test_layers_beyond_depth_rejected(self, tiny_model):
        with pytest.raises(ConfigError):
            tiny_model.forward_keys(random_pixels(16, 16), 4)

    def test_non_multiple_input_rejected(self, tiny_model):
        with pytest.raises(ConfigError):
            tiny_model.forward_keys(random_pixels(20, 16), 1)

    def test_native_grid_uses_stored_positions(self, tiny_model):
        assert torch.equal(tiny_model._positional(4, 4),
                           tiny_model.pos_embed)

    def test_interpolated_positions_shape(self, tiny_model):
        assert tiny_model._positional(6, 9).shape == (1, 55, 16)


class TestCheckpointIo:
    def test_round_trip_preserves_outputs(self, tiny_model, tmp_path):
        path = tmp_path / "model.pth"
        save_checkpoint(tiny_model, path)
        reloaded = load_checkpoint(path)
        assert reloaded.config == tiny_model.config
        pixels = random_pixels(32, 48, seed=8)
        with torch.inference_mode():
            a = tiny_model.forward_keys(pixels, 3)
            b = reloaded.forward_keys(pixels, 3)
        assert torch.equal(a, b)

    def test_bare_state_dict_accepted(self, tiny_model, tmp_path):
        path = tmp_path / "bare.pth"
        torch.save(tiny_model.state_dict(), path)
        model = load_checkpoint(path, num_heads=2)
        assert model.config.depth == 3

    def test_prefixed_state_dict_accepted(self, tiny_model, tmp_path):
        prefixed = {f"module.backbone.{k}": v
                    for k, v in tiny_model.state_dict().items()}
        path = tmp_path / "prefixed.pth"
        torch.save(prefixed, path)
        model = load_checkpoint(path, num_heads=2)
        pixels = random_pixels(16, 16)
        with torch.inference_mode():
            assert torch.equal(model.forward_keys(pixels, 1),
                               tiny_model.forward_keys(pixels, 1))

    def test_stored_head_count_survives(self, tiny_checkpoint):
        assert load_checkpoint(tiny_checkpoint).config.num_heads == 2

    def test_explicit_heads_override_stored(self, tiny_checkpoint):
        assert load_checkpoint(tiny_checkpoint,
                               num_heads=4).config.num_heads == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "nope.pth")

    def test_garbage_file(self, tmp_path):
        path = tmp_path / "junk.pth"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated_state_dict(self, tiny_model, tmp_path):
        state = dict(tiny_model.state_dict())
        del state["blocks.1.attn.qkv.weight"]
        path = tmp_path / "partial.pth"
        torch.save(state, path)
        with pytest.raises(CheckpointError):
            load_checkpoint(path, num_heads=2)


class TestConfigInference:
    def test_reads_shapes(self, tiny_model):
        config = config_from_state_dict(tiny_model.state_dict(), num_heads=2)
        assert config == TINY

    def test_missing_tensor(self):
        with pytest.raises(CheckpointError):
            config_from_state_dict({"cls_token": torch.zeros(1, 1, 8)})

    def test_non_square_position_grid(self, tiny_model):
        state = dict(tiny_model.state_dict())
        state["pos_embed"] = torch.zeros(1, 6, 16)
        with pytest.raises(CheckpointError):
            config_from_state_dict(state, num_heads=2)

    def test_indivisible_heads_rejected(self):
        with pytest.raises(ConfigError):
            ViTConfig(patch_size=8, dim=16, depth=1, num_heads=3,
                      mlp_hidden=32, native_grid=4)
