import numpy as np
import pytest
import torch


def synthetic_deit_state(embed_dim=192, depth=12, heads=3, classes=1000, seed=0):
    """A random state dict with the exact tensor names and shapes of a
    timm-style DeiT checkpoint."""
    gen = torch.Generator().manual_seed(seed)

    def w(*shape, std=0.02):
        return torch.randn(*shape, generator=gen) * std

    d = embed_dim
    hidden = 4 * d
    state = {
        "cls_token": w(1, 1, d),
        "pos_embed": w(1, 197, d),
        "patch_embed.proj.weight": w(d, 3, 16, 16),
        "patch_embed.proj.bias": w(d),
        "norm.weight": 1.0 + w(d),
        "norm.bias": w(d),
        "head.weight": w(classes, d),
        "head.bias": w(classes),
    }
    for i in range(depth):
        pre = f"blocks.{i}."
        state[pre + "norm1.weight"] = 1.0 + w(d)
        state[pre + "norm1.bias"] = w(d)
        state[pre + "attn.qkv.weight"] = w(3 * d, d)
        state[pre + "attn.qkv.bias"] = w(3 * d)
        state[pre + "attn.proj.weight"] = w(d, d)
        state[pre + "attn.proj.bias"] = w(d)
        state[pre + "norm2.weight"] = 1.0 + w(d)
        state[pre + "norm2.bias"] = w(d)
        state[pre + "mlp.fc1.weight"] = w(hidden, d)
        state[pre + "mlp.fc1.bias"] = w(hidden)
        state[pre + "mlp.fc2.weight"] = w(d, hidden)
        state[pre + "mlp.fc2.bias"] = w(d)
    return state


@pytest.fixture(scope="session")
def deit_t_state():
    return synthetic_deit_state()


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """A small labeled image set: RGB PNGs of assorted sizes, one grayscale,
    one corrupt file."""
    from PIL import Image

    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(1)
    sizes = [(320, 240), (240, 320), (224, 224), (500, 375), (256, 256)]
    lines = []
    for i, size in enumerate(sizes):
        arr = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
        Image.fromarray(arr, "RGB").save(root / f"img{i}.png")
        lines.append(f"img{i}.png,{i * 7}")

    gray = rng.integers(0, 256, size=(300, 300), dtype=np.uint8)
    Image.fromarray(gray, "L").save(root / "gray.png")
    lines.append("gray.png,42")

    (root / "broken.png").write_bytes(b"not an image at all")
    lines.append("broken.png,3")

    (root / "labels.csv").write_text("\n".join(lines) + "\n")
    return root
