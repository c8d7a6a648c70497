"""Seeded invariant suite behind the `vitprune selftest` command.

Each check re-derives its expectation independently of the code path it
exercises (naive loops, literal definitions, brute-force search), so a pass
means the fast implementations agree with first principles.
"""

from __future__ import annotations

import numpy as np

from . import linalg
from .model import forward
from .prune import PruneConfig, dpc_cluster, prune_layer, weighted_merge
from .testing import random_image, random_weight_store, small_config


def naive_dpc(subset: np.ndarray, c: int):
    """Literal evaluation of the density-peak definitions with plain loops.

    Densities use the raw exponential form (fine at self-test scale), the
    separation rule is applied per token, and centers are the top-c by the
    raw density x separation product. Ties resolve to the lower index.
    """
    n = subset.shape[0]
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            diff = subset[i] - subset[j]
            dist[i, j] = np.sqrt(np.dot(diff, diff))
    rho = np.zeros(n)
    for i in range(n):
        rho[i] = np.exp(-sum(dist[i, j] ** 2 for j in range(n)))

    def denser(j, i):
        return rho[j] > rho[i] or (rho[j] == rho[i] and j < i)

    delta = np.zeros(n)
    for i in range(n):
        above = [j for j in range(n) if denser(j, i)]
        if above:
            delta[i] = min(dist[i, j] for j in above)
        else:
            delta[i] = max(dist[i, j] for j in range(n)) if n > 1 else 0.0
    gamma = rho * delta
    ranked = sorted(range(n), key=lambda i: (-gamma[i], i))
    centers = ranked[:c]
    member = {}
    for rank, t in enumerate(centers):
        member[t] = rank
    for i in range(n):
        if i in member:
            continue
        best = min(centers, key=lambda t: (dist[i, t], t))
        member[i] = member[best]
    return centers, [member[i] for i in range(n)]


def _check_linalg(rng):
    a, b, c = (rng.standard_normal((4, 4)) for _ in range(3))
    lhs = linalg.matmul(linalg.matmul(a, b), c)
    rhs = linalg.matmul(a, linalg.matmul(b, c))
    assert np.abs(lhs - rhs).max() < 1e-9, "matmul associativity"

    s = linalg.row_softmax(rng.standard_normal((6, 9)))
    assert (s > 0).all() and np.abs(s.sum(axis=1) - 1).max() < 1e-9, "softmax rows"

    m = rng.standard_normal((7, 5))
    d2 = linalg.pairwise_sqdist(m)
    assert (d2 == d2.T).all() and (np.diag(d2) == 0).all(), "sqdist symmetry"

    x = rng.standard_normal((5, 3))
    med = linalg.column_median(x)
    base = np.abs(x - med).sum(axis=0)
    for j in range(3):
        for cand in np.arange(x[:, j].min(), x[:, j].max() + 1e-9, 0.01):
            assert base[j] <= np.abs(x[:, j] - cand).sum() + 1e-12, "median l1 optimality"


def _check_dpc(rng, instances=60):
    for _ in range(instances):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 5))
        c = int(rng.integers(1, min(3, n) + 1))
        subset = rng.uniform(0.0, 2.0, size=(n, d))
        got = dpc_cluster(subset, c)
        centers, member = naive_dpc(subset, c)
        assert list(got.center_indices) == centers, "dpc centers"
        assert list(got.member_of) == member, "dpc assignment"


def _check_identity(rng, trials=5):
    cfg = small_config()
    for _ in range(trials):
        w = random_weight_store(cfg, rng)
        img = random_image(cfg, rng)
        base, _ = forward(img, w, config=cfg)
        pc = PruneConfig(prune_layers=(2, 4), keep_rate=1.0, pair_count=0)
        pruned, _ = forward(img, w, prune=pc, config=cfg)
        rel = np.abs(base - pruned).max() / max(np.abs(base).max(), 1e-30)
        assert rel <= 1e-6, "identity schedule"


def _check_count_law(rng):
    import math

    from .types import ClsAttention, TokenSequence

    n_patch = 196
    for eta in (0.3, 0.5, 0.7, 0.9):
        pc = PruneConfig(keep_rate=eta)
        n = n_patch
        for _ in range(3):
            toks = TokenSequence.fresh(rng.standard_normal((n + 1, 8)))
            attn = ClsAttention(linalg.row_softmax(rng.standard_normal((2, n + 1))))
            out = prune_layer(toks, attn, pc)
            assert out.n_patch_tokens == math.ceil(eta * n), "count law"
            n = out.n_patch_tokens


def _check_merge(rng):
    toks = rng.standard_normal((6, 4))
    toks[3] = toks[1]  # identical pair
    scores = rng.uniform(0.1, 1.0, 6)
    res = weighted_merge(toks, [[1, 3], [0, 2, 4], [5]], scores)
    assert np.abs(res.tokens[0] - toks[1]).max() < 1e-9, "merge of identical tokens"
    grp = toks[[0, 2, 4]]
    assert (res.tokens[1] >= grp.min(axis=0) - 1e-12).all(), "merge convex hull low"
    assert (res.tokens[1] <= grp.max(axis=0) + 1e-12).all(), "merge convex hull high"


CHECKS = [
    ("linalg properties", _check_linalg),
    ("dpc oracle equivalence", _check_dpc),
    ("identity schedule", _check_identity),
    ("count law", _check_count_law),
    ("merge properties", _check_merge),
]


def run_selftest(seed: int = 0, force_fail: bool = False):
    """Run every check; returns (all_ok, report lines)."""
    lines = []
    ok = True
    for i, (name, check) in enumerate(CHECKS):
        rng = np.random.default_rng(seed + i)
        try:
            check(rng)
            lines.append(f"ok   {name}")
        except AssertionError as e:
            ok = False
            lines.append(f"FAIL {name}: {e} (seed={seed + i})")
    if force_fail:
        ok = False
        lines.append(f"FAIL forced failure (test hook) (seed={seed})")
    return ok, lines
