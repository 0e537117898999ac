import numpy as np
import pytest
import torch
from PIL import Image

from vitfeat import ViTConfig, VisionTransformer, save_checkpoint

TINY = ViTConfig(patch_size=8, dim=16, depth=3, num_heads=2,
                 mlp_hidden=32, native_grid=4)


def build_tiny(seed: int = 11, config: ViTConfig = TINY) -> VisionTransformer:
    torch.manual_seed(seed)
    model = VisionTransformer(config)
    model.eval()
    return model


@pytest.fixture(scope="session")
def tiny_model():
    return build_tiny()


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory, tiny_model):
    path = tmp_path_factory.mktemp("ckpt") / "tiny.pth"
    save_checkpoint(tiny_model, path)
    return path


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """A few deterministic test images of varied, partly non-multiple sizes."""
    out = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(5)
    for name, (width, height) in (("a32x48", (32, 48)),
                                  ("b100x100", (100, 100)),
                                  ("c40x24", (40, 24))):
        pixels = rng.integers(0, 255, size=(height, width, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(out / f"{name}.png")
    return out
