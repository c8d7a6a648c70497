"""In-block token reduction: decouple by class attention, cluster the
inattentive side with a single-pass density-peak method, match homogeneous
attentive pairs, and merge groups by attention-weighted sums.

Also hosts the baseline reduction strategies (top-K preservation, pack-one,
cluster-everything, fixed-window pooling) so they can be compared under one
configuration surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigError, InputError
from .types import ClsAttention, TokenSequence, VitConfig

STRATEGIES = (
    "none",
    "importance_only",
    "pack_one",
    "diversity_only",
    "decouple_merge",
    "avg_pool",
    "max_pool",
)

WEIGHT_MODES = ("normalized", "raw")

AUTO = "auto"


@dataclass(frozen=True)
class PruneConfig:
    """Which reduction runs, where, and how hard.

    ``pair_count`` (matched attentive pairs) and ``cluster_count``
    (inattentive clusters) may be explicit counts or "auto". Auto picks
    5% of the layer's incoming patch count for both, clamped so the merges
    stay feasible; with equal pair and cluster counts the layer's output
    patch count lands exactly on ceil(keep_rate * n_in).
    """

    strategy: str = "decouple_merge"
    prune_layers: tuple[int, ...] = (4, 7, 10)
    keep_rate: float = 0.7
    pair_count: int | str = AUTO
    cluster_count: int | str = AUTO
    weight_mode: str = "normalized"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.keep_rate <= 1.0:
            raise ConfigError(f"keep_rate must be in (0, 1], got {self.keep_rate}")
        layers = tuple(int(b) for b in self.prune_layers)
        if any(b < 1 for b in layers):
            raise ConfigError("prune layer indices are 1-based and must be >= 1")
        if any(b >= c for b, c in zip(layers, layers[1:])):
            raise ConfigError("prune_layers must be strictly increasing")
        object.__setattr__(self, "prune_layers", layers)
        for name in ("pair_count", "cluster_count"):
            v = getattr(self, name)
            if v != AUTO and (not isinstance(v, int) or v < 0):
                raise ConfigError(f"{name} must be a non-negative int or 'auto'")
        if self.weight_mode not in WEIGHT_MODES:
            raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")


@dataclass
class ClusterAssignment:
    """Output of the density-peak pass over one token subset."""

    center_indices: np.ndarray  # (c,) token indices, in descending center score
    member_of: np.ndarray  # (n,) cluster id per token, ids index center_indices
    log_gamma: np.ndarray  # (n,) log(density) + log(separation) per token


@dataclass
class PairMatching:
    """Greedily selected disjoint pairs of mutually similar tokens."""

    pairs: tuple[tuple[int, int], ...]
    unmatched: tuple[int, ...]
    clamped: bool = False


@dataclass
class MergeResult:
    tokens: np.ndarray  # one row per group
    mean_fallback: tuple[int, ...] = ()  # groups merged by plain mean (zero scores)


def importance_scores(attn: ClsAttention) -> np.ndarray:
    """Head-averaged class attention for the patch tokens.

    The class token's self-entry is dropped and the remaining values are kept
    as-is (not renormalized), so they are comparable across heads and layers.
    """
    return attn.head_mean[1:].copy()


def keep_count(keep_rate: float, n_patch: int) -> int:
    """Patch tokens retained as attentive: ceil(keep_rate * n_patch)."""
    return math.ceil(keep_rate * n_patch)


def decouple(scores: np.ndarray, keep_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Split patch-token indices into (attentive, inattentive) by score.

    The top ceil(keep_rate * n) scores win; ties go to the lower original
    index. Both returned index arrays are sorted ascending.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    k = keep_count(keep_rate, n)
    if k == 0:
        raise ConfigError("keep rate leaves zero attentive tokens")
    order = np.argsort(-scores, kind="stable")  # stable => ties keep lower index
    attentive = np.sort(order[:k])
    inattentive = np.sort(order[k:])
    return attentive, inattentive


def dpc_cluster(subset: np.ndarray, c: int) -> ClusterAssignment:
    """Single-pass density-peak clustering of the given token rows.

    Density is ranked by the negative sum of squared distances to all other
    tokens (worked in log space so realistic token norms cannot underflow the
    ranking). Separation is the distance to the nearest denser token, with
    the globally densest token taking its maximum distance instead. Centers
    are the top-c tokens by density x separation; every other token joins the
    cluster of its nearest center. All ties resolve to the lower index.
    """
    subset = linalg.as_matrix(subset)
    n = subset.shape[0]
    if not 1 <= c <= n:
        raise InputError(f"cluster count {c} not in [1, {n}]")

    d2 = linalg.pairwise_sqdist(subset)
    dist = np.sqrt(d2)
    log_rho = -d2.sum(axis=1)

    # Density rank with lower-index tie-break; "denser than i" means it
    # precedes i in this order.
    order = np.argsort(-log_rho, kind="stable")
    delta = np.empty(n)
    for pos, i in enumerate(order):
        if pos == 0:
            delta[i] = dist[i].max() if n > 1 else 0.0
        else:
            delta[i] = dist[i, order[:pos]].min()

    with np.errstate(divide="ignore"):
        log_delta = np.where(delta > 0.0, np.log(delta), -np.inf)
    log_gamma = log_rho + log_delta

    centers = np.argsort(-log_gamma, kind="stable")[:c]

    member_of = np.empty(n, dtype=np.intp)
    center_rank = {int(tok): rank for rank, tok in enumerate(centers)}
    center_list = [int(t) for t in centers]
    for i in range(n):
        if i in center_rank:
            member_of[i] = center_rank[i]
            continue
        best = min(center_list, key=lambda t: (dist[i, t], t))
        member_of[i] = center_rank[best]

    return ClusterAssignment(centers, member_of, log_gamma)


def match_attentive(subset: np.ndarray, q: int) -> PairMatching:
    """Greedy disjoint pairing of the most cosine-similar token rows.

    Pairs are taken in descending similarity (ties by lexicographic index
    pair) until q pairs are placed or no disjoint pair remains; in the latter
    case the result is flagged clamped.
    """
    subset = linalg.as_matrix(subset)
    n = subset.shape[0]
    if q < 0:
        raise InputError("pair count must be non-negative")
    norms = np.linalg.norm(subset, axis=1)
    if np.any(norms == 0.0):
        raise InputError("cannot match: zero-norm token present")

    pairs: list[tuple[int, int]] = []
    if q > 0 and n >= 2:
        unit = subset / norms[:, None]
        sims = unit @ unit.T
        cand = [(-sims[i, j], i, j) for i in range(n) for j in range(i + 1, n)]
        cand.sort()
        used = np.zeros(n, dtype=bool)
        for _, i, j in cand:
            if used[i] or used[j]:
                continue
            pairs.append((i, j))
            used[i] = used[j] = True
            if len(pairs) == q:
                break

    paired = {t for p in pairs for t in p}
    unmatched = tuple(i for i in range(n) if i not in paired)
    return PairMatching(tuple(pairs), unmatched, clamped=len(pairs) < q)


def weighted_merge(
    tokens: np.ndarray,
    groups,
    scores: np.ndarray,
    mode: str = "normalized",
) -> MergeResult:
    """Collapse each group of token rows into one row by score-weighted sum.

    Normalized mode divides by the group's score mass (a singleton group
    passes its row through untouched); raw mode applies the scores literally.
    A group whose scores are all zero falls back to the arithmetic mean and
    is reported in ``mean_fallback``.
    """
    tokens = linalg.as_matrix(tokens)
    scores = np.asarray(scores, dtype=np.float64)
    if mode not in WEIGHT_MODES:
        raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
    seen: set[int] = set()
    for g in groups:
        for i in g:
            if i in seen:
                raise InputError(f"groups are not a partition: index {i} repeated")
            seen.add(i)
    if seen != set(range(tokens.shape[0])):
        raise InputError("groups are not a partition: indices missing")

    out = np.empty((len(groups), tokens.shape[1]))
    fallback: list[int] = []
    for gi, g in enumerate(groups):
        idx = np.asarray(list(g), dtype=np.intp)
        if mode == "normalized":
            if len(idx) == 1:
                out[gi] = tokens[idx[0]]
                continue
            mass = scores[idx].sum()
            if mass == 0.0:
                out[gi] = tokens[idx].mean(axis=0)
                fallback.append(gi)
                continue
            w = scores[idx] / mass
            out[gi] = w @ tokens[idx]
        else:
            out[gi] = scores[idx] @ tokens[idx]
    return MergeResult(out, tuple(fallback))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resolve_counts(cfg: PruneConfig, n_patch: int, k: int) -> tuple[int, int]:
    """Effective (pair_count, cluster_count) for a layer with n_patch tokens
    of which k stay attentive.

    Auto uses 5% of n_patch (at least 1) for both, clamped to what the layer
    can actually support: at most floor(k/2) disjoint pairs and at most
    n_patch - k clusters. Explicit counts are validated instead.
    """
    n_inatt = n_patch - k
    if cfg.pair_count == AUTO or cfg.cluster_count == AUTO:
        auto = max(1, _round_half_up(0.05 * n_patch))
        auto = min(auto, n_inatt, k // 2)
    if cfg.pair_count == AUTO:
        q = auto
    else:
        q = int(cfg.pair_count)
        if q >= k:
            raise ConfigError(f"pair_count {q} must be < attentive count {k}")
    if cfg.cluster_count == AUTO:
        c = auto
    else:
        c = int(cfg.cluster_count)
        if c > n_inatt:
            raise ConfigError(
                f"cluster_count {c} exceeds inattentive count {n_inatt}"
            )
    return q, c


def prune_layer(
    tokens: TokenSequence, attn: ClsAttention, cfg: PruneConfig
) -> TokenSequence:
    """Apply the configured reduction strategy between MHSA and FFN.

    For decouple_merge the output is: class token; merged/unmatched attentive
    tokens ordered by the original position of each group's highest-score
    member; merged inattentive clusters in descending center score. Output
    provenance is the union of each group's provenance.
    """
    if cfg.strategy == "none":
        return tokens

    scores = importance_scores(attn)
    patches = tokens.patch_tokens
    n_patch = tokens.n_patch_tokens
    if scores.shape[0] != n_patch:
        raise InputError("attention length does not match token count")

    if cfg.strategy in ("avg_pool", "max_pool"):
        return _pool(tokens, cfg)

    if cfg.strategy == "diversity_only":
        return _cluster_all(tokens, scores, cfg)

    attentive, inattentive = decouple(scores, cfg.keep_rate)
    k = attentive.shape[0]

    if cfg.strategy == "importance_only":
        keep = np.concatenate(([0], attentive + 1))
        return TokenSequence(
            tokens.tokens[keep],
            tuple(tokens.provenance[i] for i in attentive),
        )

    if cfg.strategy == "pack_one":
        rows = [tokens.tokens[0]] + [tokens.tokens[i + 1] for i in attentive]
        prov = [tokens.provenance[i] for i in attentive]
        if inattentive.size:
            merged = weighted_merge(
                patches[inattentive],
                [list(range(inattentive.size))],
                scores[inattentive],
                cfg.weight_mode,
            )
            rows.append(merged.tokens[0])
            prov.append(_union_prov(tokens, inattentive))
        return TokenSequence(np.vstack(rows), tuple(prov))

    # decouple_merge
    q, c = resolve_counts(cfg, n_patch, k)

    matching = (
        match_attentive(patches[attentive], q)
        if q > 0
        else PairMatching((), tuple(range(k)))
    )
    att_groups = [*([a, b] for a, b in matching.pairs)]
    att_groups += [[i] for i in matching.unmatched]
    # Order groups by the original position of their highest-score member
    # (ties to the lower index).
    def rep_pos(group):
        best = min(group, key=lambda i: (-scores[attentive[i]], attentive[i]))
        return attentive[best]

    att_groups.sort(key=rep_pos)
    att_merged = weighted_merge(
        patches[attentive], att_groups, scores[attentive], cfg.weight_mode
    )

    rows = [tokens.tokens[0]]
    prov: list[tuple[int, ...]] = []
    for gi, g in enumerate(att_groups):
        rows.append(att_merged.tokens[gi])
        prov.append(_union_prov(tokens, attentive[np.asarray(g, dtype=np.intp)]))

    if inattentive.size and c > 0:
        assign = dpc_cluster(patches[inattentive], c)
        cluster_groups = [
            [i for i in range(inattentive.size) if assign.member_of[i] == cid]
            for cid in range(c)
        ]
        in_merged = weighted_merge(
            patches[inattentive], cluster_groups, scores[inattentive], cfg.weight_mode
        )
        for cid in range(c):  # cluster ids already rank by descending center score
            rows.append(in_merged.tokens[cid])
            prov.append(
                _union_prov(tokens, inattentive[np.asarray(cluster_groups[cid], dtype=np.intp)])
            )

    return TokenSequence(np.vstack(rows), tuple(prov))


def _union_prov(tokens: TokenSequence, patch_indices) -> tuple[int, ...]:
    out: list[int] = []
    for i in patch_indices:
        out.extend(tokens.provenance[int(i)])
    return tuple(sorted(out))


def _cluster_all(tokens: TokenSequence, scores: np.ndarray, cfg: PruneConfig) -> TokenSequence:
    """Cluster every patch token into ceil(keep_rate * n) groups, ignoring
    importance for the grouping; groups are ordered by their center's
    original position so a keep rate of 1 is the identity."""
    n_patch = tokens.n_patch_tokens
    k = keep_count(cfg.keep_rate, n_patch)
    assign = dpc_cluster(tokens.patch_tokens, k)
    by_center_pos = np.argsort(assign.center_indices, kind="stable")
    rows = [tokens.tokens[0]]
    prov = []
    groups = [
        [i for i in range(n_patch) if assign.member_of[i] == cid] for cid in range(k)
    ]
    merged = weighted_merge(tokens.patch_tokens, groups, scores, cfg.weight_mode)
    for cid in by_center_pos:
        rows.append(merged.tokens[cid])
        prov.append(_union_prov(tokens, groups[cid]))
    return TokenSequence(np.vstack(rows), tuple(prov))


def _pool(tokens: TokenSequence, cfg: PruneConfig) -> TokenSequence:
    """Collapse fixed consecutive windows of patch tokens down to
    ceil(keep_rate * n) outputs by average or elementwise max."""
    n_patch = tokens.n_patch_tokens
    k = keep_count(cfg.keep_rate, n_patch)
    chunks = np.array_split(np.arange(n_patch), k)
    rows = [tokens.tokens[0]]
    prov = []
    for chunk in chunks:
        window = tokens.patch_tokens[chunk]
        if cfg.strategy == "avg_pool":
            rows.append(window.mean(axis=0))
        else:
            rows.append(window.max(axis=0))
        prov.append(_union_prov(tokens, chunk))
    return TokenSequence(np.vstack(rows), tuple(prov))


def layer_output_patches(cfg: PruneConfig, n_patch: int) -> int:
    """Analytic post-reduction patch count for one layer (no tokens needed)."""
    if cfg.strategy == "none":
        return n_patch
    k = keep_count(cfg.keep_rate, n_patch)
    if cfg.strategy == "importance_only":
        return k
    if cfg.strategy == "pack_one":
        return k + (1 if n_patch - k > 0 else 0)
    if cfg.strategy in ("diversity_only", "avg_pool", "max_pool"):
        return k
    q, c = resolve_counts(cfg, n_patch, k)
    if n_patch - k == 0:
        c = 0
    return k - min(q, k // 2) + c


def token_schedule(config: VitConfig, prune: PruneConfig | None) -> list[tuple[int, int]]:
    """Per-block (tokens entering MHSA, tokens entering FFN), class token
    included. The reduction runs between the two, so MHSA sees the pre-prune
    count and FFN the post-prune count at each prune layer."""
    if prune is not None:
        bad = [b for b in prune.prune_layers if b > config.depth]
        if bad:
            raise InputError(f"prune layer(s) {bad} outside [1, {config.depth}]")
    n = config.seq_len
    schedule = []
    for block in range(1, config.depth + 1):
        n_ffn = n
        if prune is not None and block in prune.prune_layers:
            n_ffn = layer_output_patches(prune, n - 1) + 1
        schedule.append((n, n_ffn))
        n = n_ffn
    return schedule
