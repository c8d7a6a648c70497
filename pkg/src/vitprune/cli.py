"""Operator command line: FLOPs planning, single-image inference, manifest
evaluation, diversity measurement, and the invariant self-test.

All commands are deterministic given identical inputs (and seed, for
selftest). Machine-readable output: --json everywhere, --csv where rows are
the product. Exit codes: 0 success, 2 bad usage/configuration, 1 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .diversity import measure
from .errors import ConfigError, InputError, VitPruneError
from .flops import flops
from .model import forward
from .model_io import load_manifest, load_tensor, load_weights
from .prune import AUTO, STRATEGIES, PruneConfig
from .selftest import run_selftest
from .types import PRESETS, VitConfig

THREADS_ENV = "VITPRUNE_THREADS"


def _add_geometry(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model geometry")
    g.add_argument("--model", choices=sorted(PRESETS), help="preset geometry")
    g.add_argument("--image-size", type=int, default=224)
    g.add_argument("--patch-size", type=int, default=16)
    g.add_argument("--dim", type=int, default=192)
    g.add_argument("--depth", type=int, default=12)
    g.add_argument("--heads", type=int, default=3)
    g.add_argument("--mlp-ratio", type=float, default=4.0)
    g.add_argument("--classes", type=int, default=1000)


def _add_prune(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("token reduction")
    g.add_argument("--keep-rate", type=float, default=None,
                   help="enable reduction with this keep rate")
    g.add_argument("--strategy", choices=STRATEGIES, default="decouple_merge")
    g.add_argument("--prune-layers", default="4,7,10",
                   help="comma-separated 1-based block indices")
    g.add_argument("--pairs", default=AUTO, help="attentive pairs to fuse, or 'auto'")
    g.add_argument("--clusters", default=AUTO, help="inattentive clusters, or 'auto'")
    g.add_argument("--weight-mode", choices=("normalized", "raw"), default="normalized")


def _geometry(args) -> VitConfig:
    if args.model:
        return PRESETS[args.model]
    return VitConfig(
        image_size=args.image_size, patch_size=args.patch_size,
        embed_dim=args.dim, depth=args.depth, num_heads=args.heads,
        mlp_ratio=args.mlp_ratio, num_classes=args.classes,
    )


def _count(value):
    return value if value == AUTO else int(value)


def _prune_config(args) -> PruneConfig | None:
    if args.keep_rate is None:
        return None
    layers = tuple(int(x) for x in str(args.prune_layers).split(",") if x.strip())
    return PruneConfig(
        strategy=args.strategy,
        prune_layers=layers,
        keep_rate=args.keep_rate,
        pair_count=_count(args.pairs),
        cluster_count=_count(args.clusters),
        weight_mode=args.weight_mode,
    )


def _emit(report: dict, as_json: bool, text_lines) -> None:
    if as_json:
        print(json.dumps(report, indent=2))
    else:
        for line in text_lines:
            print(line)


def _threads() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def cmd_flops(args) -> int:
    config = _geometry(args)
    prune = _prune_config(args)
    t0 = time.perf_counter()
    rep = flops(config, prune, include_embed=args.include_embed,
                include_merge_costs=args.include_merge_costs)
    wall = time.perf_counter() - t0

    report = {
        "command": "flops",
        "model": args.model or "custom",
        "config": {"embed_dim": config.embed_dim, "depth": config.depth,
                   "heads": config.num_heads, "seq_len": config.seq_len},
        "prune": None if prune is None else {
            "strategy": prune.strategy, "keep_rate": prune.keep_rate,
            "prune_layers": list(prune.prune_layers),
            "pairs": prune.pair_count, "clusters": prune.cluster_count,
        },
        "per_layer": [
            {"block": l.block, "tokens_mhsa": l.n_mhsa, "tokens_ffn": l.n_ffn,
             "mhsa_flops": l.mhsa_flops, "ffn_flops": l.ffn_flops,
             "merge_flops": l.merge_flops}
            for l in rep.per_layer
        ],
        "embed_flops": rep.embed_flops,
        "head_flops": rep.head_flops,
        "total_flops": rep.total_flops,
        "total_gflops": rep.total_flops / 1e9,
        "unpruned_flops": rep.unpruned_flops,
        "reduction_pct": rep.reduction_pct,
        "wall_seconds": wall,
    }
    lines = [f"{'block':>5} {'N@mhsa':>7} {'N@ffn':>6} {'mhsa':>14} {'ffn':>14}"]
    for l in rep.per_layer:
        lines.append(f"{l.block:>5} {l.n_mhsa:>7} {l.n_ffn:>6} "
                     f"{l.mhsa_flops:>14,} {l.ffn_flops:>14,}")
    if args.include_embed:
        lines.append(f"patch embed {rep.embed_flops:,}  head {rep.head_flops:,}")
    lines.append(f"total {rep.total_flops:,} FLOPs = {rep.total_flops / 1e9:.3f} G")
    lines.append(f"reduction vs unpruned: {rep.reduction_pct:.2f}%")
    _emit(report, args.json, lines)
    return 0


def _load_model(args):
    """Resolve geometry from --model, the checkpoint's tag, or the explicit
    geometry flags, in that order."""
    if args.model:
        config = PRESETS[args.model]
        return load_weights(args.weights, config), config
    try:
        store = load_weights(args.weights)
        return store, PRESETS[store.model_tag]
    except ConfigError:
        config = _geometry(args)
        return load_weights(args.weights, config), config


def _top_k(logits: np.ndarray, k: int) -> list[int]:
    order = np.argsort(-logits, kind="stable")
    return [int(i) for i in order[:k]]


def cmd_infer(args) -> int:
    store, config = _load_model(args)
    prune = _prune_config(args)
    image = load_tensor(args.input)
    t0 = time.perf_counter()
    logits, trace = forward(image, store, prune, config)
    wall = time.perf_counter() - t0
    top = _top_k(logits, args.top)
    report = {
        "command": "infer",
        "weights": str(args.weights),
        "input": str(args.input),
        "top_classes": top,
        "top_logits": [float(logits[i]) for i in top],
        "layers": [
            {"block": t.block, "tokens_mhsa": t.n_mhsa, "tokens_ffn": t.n_ffn,
             "pruned": t.post_prune is not None}
            for t in trace.layers
        ],
        "wall_seconds": wall,
    }
    if args.trace:
        Path(args.trace).write_text(json.dumps(report["layers"], indent=2))
    lines = [f"top-{args.top}: " + "  ".join(
        f"{c} ({logits[c]:+.4f})" for c in top)]
    lines.append(f"wall: {wall:.3f}s")
    _emit(report, args.json, lines)
    return 0


def _eval_one(record, manifest_dir, store, config, prune):
    image = load_tensor(manifest_dir / record.tensor_path)
    t0 = time.perf_counter()
    logits, _ = forward(image, store, prune, config)
    wall = time.perf_counter() - t0
    top1 = int(np.argmax(logits))
    if prune is not None:
        base_logits, _ = forward(image, store, None, config)
        base_top1 = int(np.argmax(base_logits))
    else:
        base_top1 = top1
    ref_rel = None
    if record.reference_logits_path:
        ref = load_tensor(manifest_dir / record.reference_logits_path).ravel()
        denom = max(float(np.abs(ref).max()), 1e-30)
        ref_rel = float(np.abs(logits - ref).max() / denom)
    return {
        "tensor_path": record.tensor_path,
        "label": record.label,
        "top1": top1,
        "top1_unpruned": base_top1,
        "reference_top1": record.reference_top1,
        "reference_max_rel_diff": ref_rel,
        "correct": top1 == record.label,
        "agrees_unpruned": top1 == base_top1,
        "seconds": wall,
    }


def cmd_eval(args) -> int:
    store, config = _load_model(args)
    prune = _prune_config(args)
    manifest = load_manifest(args.manifest, config.num_classes)
    manifest_dir = Path(args.manifest).resolve().parent
    records = manifest.records[: args.limit] if args.limit else manifest.records

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(
            lambda r: _eval_one(r, manifest_dir, store, config, prune), records
        ))

    n = len(rows)
    report = {
        "command": "eval",
        "weights": str(args.weights),
        "manifest": str(args.manifest),
        "images": n,
        "top1_accuracy": (sum(r["correct"] for r in rows) / n) if n else None,
        "unpruned_agreement": (sum(r["agrees_unpruned"] for r in rows) / n) if n else None,
        "reference_agreement": None,
        "mean_seconds": (sum(r["seconds"] for r in rows) / n) if n else None,
        "rows": rows,
    }
    with_ref = [r for r in rows if r["reference_top1"] is not None]
    if with_ref:
        report["reference_agreement"] = sum(
            r["top1"] == r["reference_top1"] for r in with_ref
        ) / len(with_ref)

    if args.csv:
        with open(args.csv, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0]) if rows else
                                    ["tensor_path", "label", "top1"])
            writer.writeheader()
            writer.writerows(rows)

    def pct(x):
        return "n/a" if x is None else f"{100 * x:.2f}%"

    lines = [
        f"images: {n}",
        f"top-1 accuracy: {pct(report['top1_accuracy'])}",
        f"agreement vs unpruned: {pct(report['unpruned_agreement'])}",
        f"agreement vs references: {pct(report['reference_agreement'])}",
        f"mean wall per image: "
        + ("n/a" if report["mean_seconds"] is None else f"{report['mean_seconds']:.3f}s"),
    ]
    _emit(report, args.json, lines)
    return 0


def cmd_diversity(args) -> int:
    store, config = _load_model(args)
    manifest = load_manifest(args.manifest, config.num_classes)
    manifest_dir = Path(args.manifest).resolve().parent
    records = manifest.records[: args.limit] if args.limit else manifest.records
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    keep_rates = [float(x) for x in args.keep_rates.split(",") if x.strip()]
    layers = tuple(int(x) for x in str(args.prune_layers).split(",") if x.strip())

    base_top1 = {}
    images = {}
    for rec in records:
        images[rec.tensor_path] = load_tensor(manifest_dir / rec.tensor_path)
        logits, _ = forward(images[rec.tensor_path], store, None, config)
        base_top1[rec.tensor_path] = int(np.argmax(logits))

    rows = []
    for strategy in strategies:
        for eta in keep_rates:
            prune = PruneConfig(strategy=strategy, prune_layers=layers, keep_rate=eta)
            scores, per_token, agree = [], [], 0
            for rec in records:
                logits, trace = forward(images[rec.tensor_path], store, prune, config)
                rep = measure(trace)
                scores.append(rep.per_layer[0].score)
                per_token.append(rep.per_layer[0].score_per_token)
                agree += int(np.argmax(logits)) == base_top1[rec.tensor_path]
            n = len(records)
            rows.append({
                "strategy": strategy,
                "keep_rate": eta,
                "mean_diversity": sum(scores) / n if n else 0.0,
                "mean_diversity_per_token": sum(per_token) / n if n else 0.0,
                "top1_agreement": agree / n if n else None,
                "images": n,
            })

    if args.csv:
        with open(args.csv, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0]) if rows else
                                    ["strategy", "keep_rate"])
            writer.writeheader()
            writer.writerows(rows)

    report = {"command": "diversity", "rows": rows}
    lines = [f"{'strategy':>16} {'eta':>5} {'diversity':>12} {'per-token':>10} {'agree':>7}"]
    for r in rows:
        agree = "n/a" if r["top1_agreement"] is None else f"{100 * r['top1_agreement']:.1f}%"
        lines.append(f"{r['strategy']:>16} {r['keep_rate']:>5.2f} "
                     f"{r['mean_diversity']:>12.3f} {r['mean_diversity_per_token']:>10.4f} "
                     f"{agree:>7}")
    _emit(report, args.json, lines)
    return 0


def cmd_selftest(args) -> int:
    t0 = time.perf_counter()
    ok, lines = run_selftest(seed=args.seed, force_fail=args.force_fail)
    wall = time.perf_counter() - t0
    for line in lines:
        print(line)
    print(f"{'all checks passed' if ok else 'FAILURES above'} ({wall:.1f}s, seed={args.seed})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vitprune", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("flops", help="analytic FLOPs for a reduction plan")
    _add_geometry(p)
    _add_prune(p)
    p.add_argument("--include-embed", action="store_true",
                   help="add patch-embedding and head FLOPs")
    p.add_argument("--include-merge-costs", action="store_true",
                   help="add the reduction stage's own matrix costs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("infer", help="classify one tensor")
    p.add_argument("--weights", required=True)
    p.add_argument("--input", required=True)
    _add_geometry(p)
    _add_prune(p)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--trace", help="write per-layer token counts to this JSON file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="evaluate a manifest of tensors")
    p.add_argument("--weights", required=True)
    p.add_argument("--manifest", required=True)
    _add_geometry(p)
    _add_prune(p)
    p.add_argument("--csv", help="write one row per image to this CSV file")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diversity", help="diversity/agreement grid over strategies")
    p.add_argument("--weights", required=True)
    p.add_argument("--manifest", required=True)
    _add_geometry(p)
    p.add_argument("--strategies", default="importance_only,decouple_merge")
    p.add_argument("--keep-rates", default="0.5,0.7,0.9")
    p.add_argument("--prune-layers", default="4,7,10")
    p.add_argument("--csv")
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_diversity)

    p = sub.add_parser("selftest", help="run the seeded invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force-fail", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (VitPruneError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
