"""Portable binary containers for weights and tensors, plus the JSON
evaluation manifest.

Both containers are little-endian by definition, independent of host byte
order. Values are stored as IEEE-754 32-bit and widened to float64 on load
(computation precision). Layouts:

  weight file:  magic "VPKW" | version u32 | model_tag (u16 len + UTF-8)
                | entry count u32 | per entry: name (u16 len + UTF-8),
                ndim u8, dims u32 each, payload f32
  tensor file:  magic "VPKT" | version u32 | ndim u8 | dims u32 each
                | payload f32
  manifest:     JSON {"records": [{"tensor_path", "label",
                "reference_top1"?, "reference_logits_path"?}]}
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, InputError, MissingTensorError, ShapeError
from .types import PRESETS, VitConfig

WEIGHT_MAGIC = b"VPKW"
TENSOR_MAGIC = b"VPKT"
FORMAT_VERSION = 1


def canonical_shapes(config: VitConfig) -> dict[str, tuple[int, ...]]:
    """The closed tensor-name set (with shapes) a checkpoint must provide."""
    d = config.embed_dim
    hidden = config.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {
        "cls_token": (d,),
        "pos_embed": (config.seq_len, d),
        "patch_embed.weight": (d, 3 * config.patch_size**2),
        "patch_embed.bias": (d,),
        "norm.weight": (d,),
        "norm.bias": (d,),
        "head.weight": (config.num_classes, d),
        "head.bias": (config.num_classes,),
    }
    for i in range(config.depth):
        pre = f"blocks.{i}."
        shapes[pre + "norm1.weight"] = (d,)
        shapes[pre + "norm1.bias"] = (d,)
        shapes[pre + "attn.qkv.weight"] = (3 * d, d)
        shapes[pre + "attn.qkv.bias"] = (3 * d,)
        shapes[pre + "attn.proj.weight"] = (d, d)
        shapes[pre + "attn.proj.bias"] = (d,)
        shapes[pre + "norm2.weight"] = (d,)
        shapes[pre + "norm2.bias"] = (d,)
        shapes[pre + "mlp.fc1.weight"] = (hidden, d)
        shapes[pre + "mlp.fc1.bias"] = (hidden,)
        shapes[pre + "mlp.fc2.weight"] = (d, hidden)
        shapes[pre + "mlp.fc2.bias"] = (d,)
    return shapes


@dataclass
class WeightStore:
    """Named tensors for one checkpoint; immutable after load, safe to share
    across concurrent forward passes."""

    entries: dict[str, np.ndarray]
    model_tag: str
    format_version: int = FORMAT_VERSION

    def get(self, name: str) -> np.ndarray:
        try:
            return self.entries[name]
        except KeyError:
            raise MissingTensorError(name) from None

    def validate(self, config: VitConfig) -> None:
        shapes = canonical_shapes(config)
        for name, shape in shapes.items():
            if name not in self.entries:
                raise MissingTensorError(name)
            got = self.entries[name].shape
            if tuple(got) != shape:
                raise ShapeError(f"{name}: stored shape {got} != expected {shape}")
        extra = set(self.entries) - set(shapes)
        if extra:
            raise FormatError(f"unexpected tensor(s): {sorted(extra)}")


@dataclass(frozen=True)
class ManifestRecord:
    tensor_path: str
    label: int
    reference_top1: int | None = None
    reference_logits_path: str | None = None


@dataclass
class Manifest:
    records: list[ManifestRecord] = field(default_factory=list)


def _write_str(out, s: str) -> None:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise InputError("string too long for u16 length prefix")
    out.write(struct.pack("<H", len(raw)))
    out.write(raw)


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.ofs = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.ofs + n > len(self.data):
            raise FormatError(f"{self.path}: truncated (need {n} bytes at {self.ofs})")
        chunk = self.data[self.ofs : self.ofs + n]
        self.ofs += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")

    def f32_payload(self, shape: tuple[int, ...]) -> np.ndarray:
        count = 1
        for s in shape:
            count *= s
        raw = self.take(4 * count)
        arr = np.frombuffer(raw, dtype="<f4").reshape(shape)
        return arr.astype(np.float64)

    def done(self) -> None:
        if self.ofs != len(self.data):
            raise FormatError(f"{self.path}: {len(self.data) - self.ofs} trailing bytes")


def _read_shape(r: _Reader) -> tuple[int, ...]:
    ndim = r.u8()
    return tuple(r.u32() for _ in range(ndim))


def write_weights(store: WeightStore, path) -> None:
    with open(path, "wb") as f:
        f.write(WEIGHT_MAGIC)
        f.write(struct.pack("<I", store.format_version))
        _write_str(f, store.model_tag)
        f.write(struct.pack("<I", len(store.entries)))
        for name, tensor in store.entries.items():
            _write_str(f, name)
            f.write(struct.pack("<B", tensor.ndim))
            for dim in tensor.shape:
                f.write(struct.pack("<I", dim))
            f.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_weights(path, config: VitConfig | None = None) -> WeightStore:
    """Parse a weight container and validate completeness for its geometry.

    The geometry comes from ``config`` when given, otherwise from the file's
    model_tag, which must then name a known preset.
    """
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    if r.take(4) != WEIGHT_MAGIC:
        raise FormatError(f"{path}: bad magic, not a weight container")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    tag = r.string()
    count = r.u32()
    entries: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.string()
        shape = _read_shape(r)
        entries[name] = r.f32_payload(shape)
    r.done()

    store = WeightStore(entries, tag, version)
    if config is None:
        if tag not in PRESETS:
            raise ConfigError(
                f"{path}: model_tag {tag!r} is not a known preset; pass a config"
            )
        config = PRESETS[tag]
    store.validate(config)
    for name, tensor in entries.items():
        if not np.isfinite(tensor).all():
            raise FormatError(f"{path}: non-finite values in {name}")
    return store


def save_tensor(tensor: np.ndarray, path) -> None:
    tensor = np.asarray(tensor)
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<B", tensor.ndim))
        for dim in tensor.shape:
            f.write(struct.pack("<I", dim))
        f.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_tensor(path) -> np.ndarray:
    path = Path(path)
    r = _Reader(path.read_bytes(), path)
    if r.take(4) != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic, not a tensor container")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    shape = _read_shape(r)
    arr = r.f32_payload(shape)
    r.done()
    return arr


def load_manifest(path, num_classes: int = 1000) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(doc, dict) or "records" not in doc:
        raise FormatError(f"{path}: manifest must be an object with 'records'")
    records = []
    for i, rec in enumerate(doc["records"]):
        label = rec.get("label")
        if not isinstance(label, int) or not 0 <= label < num_classes:
            raise InputError(
                f"{path}: record {i} label {label!r} outside [0, {num_classes})"
            )
        ref = rec.get("reference_top1")
        if ref is not None and not 0 <= ref < num_classes:
            raise InputError(
                f"{path}: record {i} reference_top1 {ref!r} outside [0, {num_classes})"
            )
        records.append(
            ManifestRecord(
                tensor_path=rec["tensor_path"],
                label=label,
                reference_top1=ref,
                reference_logits_path=rec.get("reference_logits_path"),
            )
        )
    return Manifest(records)
