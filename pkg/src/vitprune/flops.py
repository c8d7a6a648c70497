"""Analytic FLOPs accounting for the transformer stack.

Counts multiply-accumulates as single FLOPs, the convention the published
per-model figures follow: per block, MHSA costs 4*N*D^2 + 2*N^2*D and the
FFN costs 2*N*D*hidden (= 8*N*D^2 at the standard 4x ratio). Patch embedding
and the classifier head are excluded by default so totals are comparable to
the published tables; an opt-in flag adds them. A second flag adds a rough
cost model for the reduction stage itself, which the published comparisons
leave out.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError
from .prune import PruneConfig, keep_count, token_schedule
from .types import VitConfig


@dataclass(frozen=True)
class LayerFlops:
    block: int
    n_mhsa: int
    n_ffn: int
    mhsa_flops: int
    ffn_flops: int
    merge_flops: int = 0

    @property
    def total(self) -> int:
        return self.mhsa_flops + self.ffn_flops + self.merge_flops


@dataclass
class FlopsReport:
    config: VitConfig
    prune: PruneConfig | None
    per_layer: list[LayerFlops]
    embed_flops: int  # 0 unless include_embed
    head_flops: int
    total_flops: int
    unpruned_flops: int
    reduction_pct: float


def mhsa_flops(n: int, d: int) -> int:
    return 4 * n * d * d + 2 * n * n * d


def ffn_flops(n: int, d: int, hidden: int) -> int:
    return 2 * n * d * hidden


def _merge_flops(cfg: PruneConfig, n_patch: int, d: int) -> int:
    """Rough matrix-op cost of the reduction stage at one layer."""
    k = keep_count(cfg.keep_rate, n_patch)
    n_inatt = n_patch - k
    if cfg.strategy == "decouple_merge":
        return (n_inatt * n_inatt + k * k) * d + n_patch * d
    if cfg.strategy == "diversity_only":
        return n_patch * n_patch * d + n_patch * d
    if cfg.strategy in ("pack_one", "avg_pool", "max_pool"):
        return n_patch * d
    return 0


def flops(
    config: VitConfig,
    prune: PruneConfig | None = None,
    include_embed: bool = False,
    include_merge_costs: bool = False,
) -> FlopsReport:
    """Analytic FLOPs for one forward pass under the given reduction plan."""
    if prune is not None:
        bad = [b for b in prune.prune_layers if not 1 <= b <= config.depth]
        if bad:
            raise InputError(f"prune layer(s) {bad} outside [1, {config.depth}]")

    d = config.embed_dim
    hidden = config.hidden_dim
    per_layer = []
    for block, (n_mhsa, n_ffn) in enumerate(token_schedule(config, prune), start=1):
        merge = 0
        if (
            include_merge_costs
            and prune is not None
            and prune.strategy != "none"
            and block in prune.prune_layers
        ):
            merge = _merge_flops(prune, n_mhsa - 1, d)
        per_layer.append(
            LayerFlops(
                block,
                n_mhsa,
                n_ffn,
                mhsa_flops(n_mhsa, d),
                ffn_flops(n_ffn, d, hidden),
                merge,
            )
        )

    embed = head = 0
    if include_embed:
        embed = config.num_patches * (3 * config.patch_size**2) * d
        head = d * config.num_classes

    total = sum(l.total for l in per_layer) + embed + head
    n_full = config.seq_len
    unpruned = config.depth * (mhsa_flops(n_full, d) + ffn_flops(n_full, d, hidden))
    unpruned += embed + head
    reduction = 100.0 * (1.0 - total / unpruned) if unpruned else 0.0
    return FlopsReport(config, prune, per_layer, embed, head, total, unpruned, reduction)
