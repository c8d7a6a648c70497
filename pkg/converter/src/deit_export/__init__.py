"""Bridge from the torch checkpoint ecosystem into the engine's portable
weight/tensor formats, with reference predictions for validation."""

from .convert import canonical_entries, convert_weights, load_state_dict
from .names import GEOMETRIES, Geometry, GeometryError, UnmappedTensorError
from .preprocess import attach_reference_checkpoint, image_to_tensor, preprocess_images
from .refmodel import reference_logits

__all__ = [
    "GEOMETRIES",
    "Geometry",
    "GeometryError",
    "UnmappedTensorError",
    "attach_reference_checkpoint",
    "canonical_entries",
    "convert_weights",
    "image_to_tensor",
    "load_state_dict",
    "preprocess_images",
    "reference_logits",
]
