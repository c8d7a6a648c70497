"""Checkpoint conversion: torch/timm DeiT state dict -> portable weight file."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .names import GEOMETRIES, Geometry, GeometryError, UnmappedTensorError, \
    canonical_shapes, source_to_canonical
from .writer import write_weight_file


def load_state_dict(checkpoint_ref) -> dict[str, torch.Tensor]:
    """Accept a path to a torch checkpoint or an in-memory state dict.
    Facebook releases wrap the state dict under a 'model' key."""
    if isinstance(checkpoint_ref, dict):
        state = checkpoint_ref
    else:
        state = torch.load(checkpoint_ref, map_location="cpu", weights_only=True)
    if "model" in state and isinstance(state["model"], dict):
        state = state["model"]
    return state


def canonical_entries(state: dict[str, torch.Tensor], geo: Geometry
                      ) -> dict[str, np.ndarray]:
    """Rename, reshape, and shape-check every tensor; reject leftovers."""
    mapping = source_to_canonical(geo)
    expected = canonical_shapes(geo)

    unmapped = sorted(set(state) - set(mapping))
    if unmapped:
        raise UnmappedTensorError(f"checkpoint tensors with no canonical home: {unmapped}")
    missing = sorted(set(mapping) - set(state))
    if missing:
        raise UnmappedTensorError(f"checkpoint is missing tensors: {missing}")

    entries: dict[str, np.ndarray] = {}
    for canonical in expected:  # canonical order fixes the file layout
        source = next(s for s, c in mapping.items() if c == canonical)
        t = state[source].detach().cpu().float()
        if canonical == "cls_token":
            t = t.reshape(-1)
        elif canonical == "pos_embed":
            t = t.reshape(-1, t.shape[-1])
        elif canonical == "patch_embed.weight":
            if t.ndim != 4:
                raise GeometryError(f"{source}: expected a conv weight, got {tuple(t.shape)}")
            t = t.reshape(t.shape[0], -1)
        got = tuple(t.shape)
        if got != expected[canonical]:
            raise GeometryError(
                f"{canonical}: shape {got} != {expected[canonical]} for this preset")
        entries[canonical] = t.numpy()
    return entries


def convert_weights(checkpoint_ref, preset: str, out_path) -> Path:
    """Emit the portable weight file for a DeiT checkpoint; deterministic,
    so re-running produces byte-identical output."""
    if preset not in GEOMETRIES:
        raise ValueError(f"unknown preset {preset!r}; known: {sorted(GEOMETRIES)}")
    geo = GEOMETRIES[preset]
    state = load_state_dict(checkpoint_ref)
    entries = canonical_entries(state, geo)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_weight_file(entries, preset, out_path)
    return out_path
