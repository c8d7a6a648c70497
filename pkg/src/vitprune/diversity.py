"""Token-diversity metric: l1 distance from a token matrix to its best
rank-1 approximation of the form ones * z^T.

The minimizing z is the per-column median, so the score is simply the summed
absolute deviation from the column medians. Larger means more diverse; zero
means all tokens are identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InputError

SCOPES = ("final_prune_layer", "all_layers")


@dataclass(frozen=True)
class LayerDiversity:
    block: int
    token_count: int  # patch tokens measured
    score: float
    score_per_token: float


@dataclass
class DiversityReport:
    per_layer: list[LayerDiversity]
    measured_at: str


def diversity_score(tokens) -> float:
    """Sum of |Z_ij - median_j| over all entries.

    Uses an exactly rounded sum, so the score is invariant under row
    permutation down to the last bit.
    """
    z = linalg.as_matrix(tokens)
    if z.shape[0] < 1:
        raise InputError("diversity of an empty token matrix")
    med = linalg.column_median(z)
    return math.fsum(np.abs(z - med).ravel())


def _entry(block: int, seq) -> LayerDiversity:
    patches = seq.patch_tokens
    if patches.shape[0] == 0:
        return LayerDiversity(block, 0, 0.0, 0.0)
    r = diversity_score(patches)
    return LayerDiversity(block, patches.shape[0], r, r / patches.shape[0])


def measure(trace, scope: str = "final_prune_layer") -> DiversityReport:
    """Diversity of the patch tokens along a forward trace.

    Default scope measures the post-reduction sequence at the final prune
    layer (the final block's output when nothing was pruned); all_layers
    measures every block's output. The class token is excluded throughout.
    Raw scores conflate token count and spread, so a per-token column is
    reported alongside.
    """
    if scope not in SCOPES:
        raise InputError(f"scope must be one of {SCOPES}")
    if scope == "all_layers":
        entries = [_entry(t.block, t.output) for t in trace.layers]
        return DiversityReport(entries, scope)
    pruned = [t for t in trace.layers if t.post_prune is not None]
    if pruned:
        last = pruned[-1]
        return DiversityReport([_entry(last.block, last.post_prune)], scope)
    last = trace.layers[-1]
    return DiversityReport([_entry(last.block, last.output)], scope)
