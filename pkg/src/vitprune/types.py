"""Core domain types shared across the engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class VitConfig:
    """Geometry of a ViT-family classifier."""

    image_size: int = 224
    patch_size: int = 16
    embed_dim: int = 192
    depth: int = 12
    num_heads: int = 3
    mlp_ratio: float = 4.0
    num_classes: int = 1000
    layer_norm_eps: float = 1e-6

    def __post_init__(self):
        if self.embed_dim % self.num_heads != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}"
            )
        if self.image_size % self.patch_size != 0:
            raise ConfigError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}"
            )
        if self.depth < 1:
            raise ConfigError("depth must be at least 1")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_size * self.grid_size

    @property
    def seq_len(self) -> int:
        """Patch tokens plus the class token."""
        return self.num_patches + 1

    @property
    def hidden_dim(self) -> int:
        return int(self.mlp_ratio * self.embed_dim)


PRESETS = {
    "deit-t": VitConfig(embed_dim=192, num_heads=3),
    "deit-s": VitConfig(embed_dim=384, num_heads=6),
    "deit-b": VitConfig(embed_dim=768, num_heads=12),
}


def preset_config(name: str) -> VitConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown model preset {name!r}; known: {sorted(PRESETS)}"
        ) from None


@dataclass
class TokenSequence:
    """Ordered token embeddings with the class token at row 0.

    ``provenance`` maps each patch token (rows 1..n-1) to the original patch
    indices it owns. For merging strategies the provenance tuples partition
    the original patch set; strategies that discard tokens (top-K
    preservation) lose the dropped patches from the partition.
    """

    tokens: np.ndarray  # (n_tokens, embed_dim) float64
    provenance: tuple[tuple[int, ...], ...]  # one tuple per patch token

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.float64)
        if self.tokens.ndim != 2 or self.tokens.shape[0] < 1:
            raise InputError("token matrix must be 2-D with at least one row")
        if len(self.provenance) != self.tokens.shape[0] - 1:
            raise InputError(
                f"provenance length {len(self.provenance)} != "
                f"{self.tokens.shape[0] - 1} patch tokens"
            )
        self.provenance = tuple(tuple(p) for p in self.provenance)

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def n_patch_tokens(self) -> int:
        return self.tokens.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    @property
    def patch_tokens(self) -> np.ndarray:
        return self.tokens[1:]

    @staticmethod
    def fresh(tokens: np.ndarray) -> "TokenSequence":
        """Wrap a raw matrix whose patch tokens are the original patches 0..n-2."""
        tokens = np.asarray(tokens, dtype=np.float64)
        return TokenSequence(tokens, tuple((i,) for i in range(tokens.shape[0] - 1)))


@dataclass
class ClsAttention:
    """Per-head softmaxed attention rows of the class-token query."""

    per_head: np.ndarray  # (num_heads, n_tokens)

    def __post_init__(self):
        self.per_head = np.asarray(self.per_head, dtype=np.float64)
        if self.per_head.ndim != 2:
            raise InputError("per-head attention must be (heads, tokens)")

    @property
    def num_heads(self) -> int:
        return self.per_head.shape[0]

    @property
    def n_tokens(self) -> int:
        return self.per_head.shape[1]

    @property
    def head_mean(self) -> np.ndarray:
        return self.per_head.mean(axis=0)
