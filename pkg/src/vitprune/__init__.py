"""CPU inference engine for ViT classifiers with pluggable in-block token
reduction, an analytic FLOPs accountant, and a token-diversity metric."""

from .diversity import DiversityReport, diversity_score, measure
from .errors import (
    ConfigError,
    FormatError,
    InputError,
    MissingTensorError,
    ShapeError,
    VitPruneError,
)
from .flops import FlopsReport, flops
from .model import ForwardTrace, ffn, forward, mhsa, patch_embed
from .model_io import (
    Manifest,
    ManifestRecord,
    WeightStore,
    canonical_shapes,
    load_manifest,
    load_tensor,
    load_weights,
    save_tensor,
    write_weights,
)
from .prune import (
    PruneConfig,
    decouple,
    dpc_cluster,
    importance_scores,
    match_attentive,
    prune_layer,
    token_schedule,
    weighted_merge,
)
from .types import PRESETS, ClsAttention, TokenSequence, VitConfig, preset_config

__version__ = "0.1.0"

__all__ = [
    "ClsAttention",
    "ConfigError",
    "DiversityReport",
    "FlopsReport",
    "FormatError",
    "ForwardTrace",
    "InputError",
    "Manifest",
    "ManifestRecord",
    "MissingTensorError",
    "PRESETS",
    "PruneConfig",
    "ShapeError",
    "TokenSequence",
    "VitConfig",
    "VitPruneError",
    "WeightStore",
    "canonical_shapes",
    "decouple",
    "diversity_score",
    "dpc_cluster",
    "ffn",
    "flops",
    "forward",
    "importance_scores",
    "load_manifest",
    "load_tensor",
    "load_weights",
    "match_attentive",
    "measure",
    "mhsa",
    "patch_embed",
    "preset_config",
    "prune_layer",
    "save_tensor",
    "token_schedule",
    "weighted_merge",
    "write_weights",
]
