"""Checkpoint-name mapping and geometry tables for the DeiT family.

The canonical name set is the closed set the engine's weight container
declares; the mapping from torch/timm state-dict names onto it is bijective
per preset. Conversion fails loudly on anything unmapped in either
direction.
"""

from __future__ import annotations

from dataclasses import dataclass


class GeometryError(ValueError):
    """Checkpoint tensors disagree with the chosen preset's geometry."""


class UnmappedTensorError(ValueError):
    """A checkpoint tensor has no canonical home, or a canonical slot is unfilled."""


@dataclass(frozen=True)
class Geometry:
    embed_dim: int
    depth: int
    heads: int
    patch_size: int = 16
    image_size: int = 224
    num_classes: int = 1000
    mlp_ratio: int = 4

    @property
    def seq_len(self) -> int:
        return (self.image_size // self.patch_size) ** 2 + 1

    @property
    def hidden(self) -> int:
        return self.mlp_ratio * self.embed_dim


GEOMETRIES = {
    "deit-t": Geometry(192, 12, 3),
    "deit-s": Geometry(384, 12, 6),
    "deit-b": Geometry(768, 12, 12),
}


def canonical_shapes(geo: Geometry) -> dict[str, tuple[int, ...]]:
    """Expected shape of every canonical tensor, in serialization order."""
    d, hidden = geo.embed_dim, geo.hidden
    shapes = {
        "cls_token": (d,),
        "pos_embed": (geo.seq_len, d),
        "patch_embed.weight": (d, 3 * geo.patch_size**2),
        "patch_embed.bias": (d,),
    }
    for i in range(geo.depth):
        pre = f"blocks.{i}."
        shapes[pre + "norm1.weight"] = (d,)
        shapes[pre + "norm1.bias"] = (d,)
        shapes[pre + "attn.qkv.weight"] = (3 * d, d)
        shapes[pre + "attn.qkv.bias"] = (3 * d,)
        shapes[pre + "attn.proj.weight"] = (d, d)
        shapes[pre + "attn.proj.bias"] = (d,)
        shapes[pre + "norm2.weight"] = (d,)
        shapes[pre + "norm2.bias"] = (d,)
        shapes[pre + "mlp.fc1.weight"] = (hidden, d)
        shapes[pre + "mlp.fc1.bias"] = (hidden,)
        shapes[pre + "mlp.fc2.weight"] = (d, hidden)
        shapes[pre + "mlp.fc2.bias"] = (d,)
    shapes["norm.weight"] = (d,)
    shapes["norm.bias"] = (d,)
    shapes["head.weight"] = (geo.num_classes, d)
    shapes["head.bias"] = (geo.num_classes,)
    return shapes


def source_to_canonical(geo: Geometry) -> dict[str, str]:
    """timm/torch state-dict name -> canonical name (bijective)."""
    mapping = {
        "cls_token": "cls_token",
        "pos_embed": "pos_embed",
        "patch_embed.proj.weight": "patch_embed.weight",
        "patch_embed.proj.bias": "patch_embed.bias",
        "norm.weight": "norm.weight",
        "norm.bias": "norm.bias",
        "head.weight": "head.weight",
        "head.bias": "head.bias",
    }
    for i in range(geo.depth):
        for leaf in ("norm1.weight", "norm1.bias", "attn.qkv.weight",
                     "attn.qkv.bias", "attn.proj.weight", "attn.proj.bias",
                     "norm2.weight", "norm2.bias", "mlp.fc1.weight",
                     "mlp.fc1.bias", "mlp.fc2.weight", "mlp.fc2.bias"):
            name = f"blocks.{i}.{leaf}"
            mapping[name] = name
    return mapping
