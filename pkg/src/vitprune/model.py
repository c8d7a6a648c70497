"""ViT forward pass on the CPU: patch embedding, pre-norm transformer blocks
with a reduction hook between MHSA and FFN, and the classifier head.

All arithmetic is float64. Weights come from a WeightStore (see model_io);
the canonical tensor names used here are listed in model_io.canonical_shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InputError
from .prune import PruneConfig, prune_layer, token_schedule
from .types import ClsAttention, TokenSequence, VitConfig, preset_config


@dataclass
class LayerTrace:
    block: int  # 1-based
    n_mhsa: int  # tokens entering the block / seen by MHSA
    n_ffn: int  # tokens seen by FFN (post-reduction at prune layers)
    cls_attention: ClsAttention
    post_prune: TokenSequence | None  # set only at prune layers
    output: TokenSequence  # end of block


@dataclass
class ForwardTrace:
    config: VitConfig
    prune: PruneConfig | None
    layers: list[LayerTrace] = field(default_factory=list)

    @property
    def prune_layers_seen(self) -> list[int]:
        return [t.block for t in self.layers if t.post_prune is not None]

    def final_post_prune(self) -> TokenSequence:
        """Sequence right after the last reduction, or the final block output
        when nothing was pruned."""
        for t in reversed(self.layers):
            if t.post_prune is not None:
                return t.post_prune
        return self.layers[-1].output


def patch_embed(image: np.ndarray, weights, config: VitConfig) -> TokenSequence:
    """Linear projection of non-overlapping patches, class token prepended,
    position embedding added."""
    image = np.asarray(image, dtype=np.float64)
    expected = (3, config.image_size, config.image_size)
    if image.shape != expected:
        raise InputError(f"image shape {image.shape} != expected {expected}")

    g, p = config.grid_size, config.patch_size
    patches = (
        image.reshape(3, g, p, g, p)
        .transpose(1, 3, 0, 2, 4)
        .reshape(config.num_patches, 3 * p * p)
    )
    w = weights.get("patch_embed.weight")  # (D, 3*p*p)
    b = weights.get("patch_embed.bias")
    tok = patches @ w.T + b
    cls = weights.get("cls_token").reshape(1, -1)
    x = np.vstack([cls, tok]) + weights.get("pos_embed")
    return TokenSequence.fresh(x)


def mhsa(
    tokens: TokenSequence, weights, block: int, config: VitConfig
) -> tuple[TokenSequence, ClsAttention]:
    """Pre-norm residual attention block; also returns the class-token
    attention row of each head, captured after the softmax and before value
    aggregation."""
    x = tokens.tokens
    if x.shape[1] != config.embed_dim:
        raise InputError(f"token dim {x.shape[1]} != embed dim {config.embed_dim}")
    pre = f"blocks.{block - 1}."
    h = linalg.layer_norm(
        x, weights.get(pre + "norm1.weight"), weights.get(pre + "norm1.bias"),
        config.layer_norm_eps,
    )
    qkv = h @ weights.get(pre + "attn.qkv.weight").T + weights.get(pre + "attn.qkv.bias")
    d_model = config.embed_dim
    q, k, v = qkv[:, :d_model], qkv[:, d_model:2 * d_model], qkv[:, 2 * d_model:]

    d = config.head_dim
    scale = 1.0 / np.sqrt(d)
    heads = []
    cls_rows = []
    for hd in range(config.num_heads):
        sl = slice(hd * d, (hd + 1) * d)
        attn = linalg.row_softmax(q[:, sl] @ k[:, sl].T * scale)
        cls_rows.append(attn[0])
        heads.append(attn @ v[:, sl])
    merged = np.hstack(heads)
    out = merged @ weights.get(pre + "attn.proj.weight").T + weights.get(pre + "attn.proj.bias")
    return (
        TokenSequence(x + out, tokens.provenance),
        ClsAttention(np.vstack(cls_rows)),
    )


def ffn(tokens: TokenSequence, weights, block: int, config: VitConfig) -> TokenSequence:
    """Pre-norm residual MLP block: Linear -> GELU -> Linear."""
    x = tokens.tokens
    pre = f"blocks.{block - 1}."
    h = linalg.layer_norm(
        x, weights.get(pre + "norm2.weight"), weights.get(pre + "norm2.bias"),
        config.layer_norm_eps,
    )
    w1 = weights.get(pre + "mlp.fc1.weight")
    if w1.shape[0] != config.hidden_dim:
        raise InputError(
            f"mlp hidden dim {w1.shape[0]} != mlp_ratio*D = {config.hidden_dim}"
        )
    h = linalg.gelu(h @ w1.T + weights.get(pre + "mlp.fc1.bias"))
    h = h @ weights.get(pre + "mlp.fc2.weight").T + weights.get(pre + "mlp.fc2.bias")
    return TokenSequence(x + h, tokens.provenance)


def forward(
    image: np.ndarray,
    weights,
    prune: PruneConfig | None = None,
    config: VitConfig | None = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Run the full classifier; returns (logits, trace).

    At each configured prune layer the reduction stage runs between MHSA and
    FFN, driven by that block's own class attention. The trace records token
    counts, class attention, the post-reduction sequence at prune layers, and
    every block's output sequence.
    """
    if config is None:
        config = preset_config(weights.model_tag)
    if prune is not None:
        token_schedule(config, prune)  # validates layer indices against depth

    tokens = patch_embed(image, weights, config)
    trace = ForwardTrace(config, prune)
    for block in range(1, config.depth + 1):
        n_in = tokens.n_tokens
        tokens, attn = mhsa(tokens, weights, block, config)
        post_prune = None
        if prune is not None and prune.strategy != "none" and block in prune.prune_layers:
            tokens = prune_layer(tokens, attn, prune)
            post_prune = tokens
        n_ffn = tokens.n_tokens
        tokens = ffn(tokens, weights, block, config)
        trace.layers.append(
            LayerTrace(block, n_in, n_ffn, attn, post_prune, tokens)
        )

    final = linalg.layer_norm(
        tokens.tokens, weights.get("norm.weight"), weights.get("norm.bias"),
        config.layer_norm_eps,
    )
    logits = final[0] @ weights.get("head.weight").T + weights.get("head.bias")
    return logits, trace
