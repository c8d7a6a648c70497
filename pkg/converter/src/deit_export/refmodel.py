"""Reference DeiT forward pass in torch, run straight off a state dict.

This is the source-ecosystem computation: the logits it produces are shipped
next to every preprocessed tensor so the engine can be validated without this
package installed.
"""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F

from .names import Geometry


@torch.no_grad()
def reference_logits(state: dict[str, torch.Tensor], geo: Geometry,
                     image: torch.Tensor) -> torch.Tensor:
    """Logits for one (3, H, W) float image tensor."""
    x = image.unsqueeze(0).float()
    p = geo.patch_size

    tok = F.conv2d(x, state["patch_embed.proj.weight"].float(),
                   state["patch_embed.proj.bias"].float(), stride=p)
    tok = tok.flatten(2).transpose(1, 2)  # (1, N, D)
    cls = state["cls_token"].float().reshape(1, 1, -1)
    z = torch.cat([cls, tok], dim=1) + state["pos_embed"].float().reshape(
        1, geo.seq_len, geo.embed_dim)

    d = geo.embed_dim // geo.heads
    scale = 1.0 / math.sqrt(d)
    for i in range(geo.depth):
        pre = f"blocks.{i}."
        h = F.layer_norm(z, (geo.embed_dim,), state[pre + "norm1.weight"].float(),
                         state[pre + "norm1.bias"].float(), eps=1e-6)
        qkv = F.linear(h, state[pre + "attn.qkv.weight"].float(),
                       state[pre + "attn.qkv.bias"].float())
        n = qkv.shape[1]
        qkv = qkv.reshape(1, n, 3, geo.heads, d).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = torch.softmax(q @ k.transpose(-2, -1) * scale, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(1, n, geo.embed_dim)
        z = z + F.linear(out, state[pre + "attn.proj.weight"].float(),
                         state[pre + "attn.proj.bias"].float())

        h = F.layer_norm(z, (geo.embed_dim,), state[pre + "norm2.weight"].float(),
                         state[pre + "norm2.bias"].float(), eps=1e-6)
        h = F.linear(h, state[pre + "mlp.fc1.weight"].float(),
                     state[pre + "mlp.fc1.bias"].float())
        h = F.gelu(h)
        h = F.linear(h, state[pre + "mlp.fc2.weight"].float(),
                     state[pre + "mlp.fc2.bias"].float())
        z = z + h

    z = F.layer_norm(z, (geo.embed_dim,), state["norm.weight"].float(),
                     state["norm.bias"].float(), eps=1e-6)
    logits = F.linear(z[:, 0], state["head.weight"].float(),
                      state["head.bias"].float())
    return logits.squeeze(0)
