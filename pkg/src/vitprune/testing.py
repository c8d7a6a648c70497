"""Helpers for building synthetic models in tests and the self-test suite."""

from __future__ import annotations

import numpy as np

from .model_io import WeightStore, canonical_shapes
from .types import VitConfig


def random_weight_store(
    config: VitConfig, rng: np.random.Generator, scale: float = 0.1,
    model_tag: str = "custom",
) -> WeightStore:
    """A complete random checkpoint for the given geometry.

    Values are generated in float32 and widened, so a write/load round trip
    through the 32-bit container is bit-exact.
    """
    entries = {}
    for name, shape in canonical_shapes(config).items():
        raw = rng.standard_normal(shape, dtype=np.float32) * np.float32(scale)
        entries[name] = raw.astype(np.float64)
    return WeightStore(entries, model_tag)


def random_image(config: VitConfig, rng: np.random.Generator) -> np.ndarray:
    img = rng.standard_normal((3, config.image_size, config.image_size), dtype=np.float32)
    return img.astype(np.float64)


def small_config(**overrides) -> VitConfig:
    """A tiny geometry that keeps forward passes cheap in property loops."""
    params = dict(
        image_size=32, patch_size=8, embed_dim=16, depth=4, num_heads=2,
        mlp_ratio=2.0, num_classes=10,
    )
    params.update(overrides)
    return VitConfig(**params)
