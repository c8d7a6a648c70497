"""Image preprocessing for 224x224 evaluation, plus reference predictions.

Standard eval transform: resize the shorter side to 256 (bicubic), center
crop 224, scale to [0, 1], normalize with the ImageNet channel statistics.
Grayscale inputs are replicated to three channels and flagged; unreadable
files are skipped with a warning.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .names import GEOMETRIES
from .refmodel import reference_logits
from .writer import write_tensor_file

log = logging.getLogger("deit_export")

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)
CROP_PCT = 0.875


def image_to_tensor(img: Image.Image, size: int = 224) -> tuple[np.ndarray, bool]:
    """(3, size, size) float32 CHW tensor; second value flags a grayscale
    source that was replicated to three channels."""
    was_gray = img.mode not in ("RGB", "RGBA", "CMYK")
    img = img.convert("RGB")

    resize_to = round(size / CROP_PCT)
    w, h = img.size
    if w <= h:
        new_w, new_h = resize_to, max(1, round(h * resize_to / w))
    else:
        new_w, new_h = max(1, round(w * resize_to / h)), resize_to
    img = img.resize((new_w, new_h), Image.BICUBIC)

    left = (new_w - size) // 2
    top = (new_h - size) // 2
    img = img.crop((left, top, left + size, top + size))

    arr = np.asarray(img, dtype=np.float32) / 255.0  # (H, W, 3)
    arr = (arr - IMAGENET_MEAN) / IMAGENET_STD
    return arr.transpose(2, 0, 1), was_gray


def read_labels(labels_path) -> list[tuple[str, int]]:
    """CSV lines of "filename,label", in file order."""
    rows = []
    with open(labels_path, newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].startswith("#"):
                continue
            rows.append((row[0].strip(), int(row[1])))
    return rows


def preprocess_images(image_dir, labels_path, preset: str, out_dir,
                      count: int | None = None, image_size: int = 224) -> Path:
    """Emit tensors, reference logits/top-1, and the manifest for a labeled
    image directory. Returns the manifest path.

    Reference predictions are computed with the torch model from the sibling
    checkpoint file <out_dir>/weights-source.pth when present; otherwise they
    are omitted (tensors + labels only).
    """
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    (out_dir / "tensors").mkdir(parents=True, exist_ok=True)

    geo = GEOMETRIES[preset]
    state = None
    source_ckpt = out_dir / "weights-source.pth"
    if source_ckpt.exists():
        state = torch.load(source_ckpt, map_location="cpu", weights_only=True)
        if "model" in state and isinstance(state["model"], dict):
            state = state["model"]
        (out_dir / "refs").mkdir(exist_ok=True)

    records = []
    labeled = read_labels(labels_path)
    if count is not None:
        labeled = labeled[:count]
    for filename, label in labeled:
        path = image_dir / filename
        try:
            with Image.open(path) as img:
                tensor, was_gray = image_to_tensor(img, image_size)
        except (OSError, UnidentifiedImageError) as e:
            log.warning("skipping unreadable image %s: %s", path, e)
            continue
        if was_gray:
            log.warning("grayscale image %s replicated to 3 channels", path)

        index = len(records)
        tensor_rel = f"tensors/{index:05d}.vpkt"
        write_tensor_file(tensor, out_dir / tensor_rel)
        record = {"tensor_path": tensor_rel, "label": label}
        if state is not None:
            logits = reference_logits(state, geo, torch.from_numpy(tensor))
            logits_rel = f"refs/{index:05d}.vpkt"
            write_tensor_file(logits.numpy(), out_dir / logits_rel)
            record["reference_top1"] = int(torch.argmax(logits))
            record["reference_logits_path"] = logits_rel
        records.append(record)

    if not records:
        raise RuntimeError("no images could be preprocessed")

    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps({"records": records}, indent=2))
    return manifest


def attach_reference_checkpoint(checkpoint_ref, out_dir) -> Path:
    """Stage the source checkpoint next to the output so preprocess_images
    can compute reference predictions from it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "weights-source.pth"
    if isinstance(checkpoint_ref, dict):
        torch.save(checkpoint_ref, target)
    else:
        target.write_bytes(Path(checkpoint_ref).read_bytes())
    return target
