"""Writers for the engine's portable binary containers.

Implemented from the format definition (not by importing the engine), so the
two sides of the interface stay independent:

  weight file:  "VPKW" | version u32 | model_tag (u16 len + UTF-8)
                | entry count u32 | per entry: name (u16 len + UTF-8),
                ndim u8, dims u32 each, payload f32 little-endian
  tensor file:  "VPKT" | version u32 | ndim u8 | dims u32 each | payload f32
"""

from __future__ import annotations

import struct

import numpy as np

FORMAT_VERSION = 1


def _packed_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _packed_tensor(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    out = struct.pack("<B", arr.ndim)
    for dim in arr.shape:
        out += struct.pack("<I", dim)
    return out + arr.tobytes()


def weight_file_bytes(entries: dict[str, np.ndarray], model_tag: str) -> bytes:
    out = b"VPKW" + struct.pack("<I", FORMAT_VERSION)
    out += _packed_str(model_tag)
    out += struct.pack("<I", len(entries))
    for name, tensor in entries.items():
        out += _packed_str(name) + _packed_tensor(tensor)
    return out


def tensor_file_bytes(arr: np.ndarray) -> bytes:
    return b"VPKT" + struct.pack("<I", FORMAT_VERSION) + _packed_tensor(arr)


def write_weight_file(entries: dict[str, np.ndarray], model_tag: str, path) -> None:
    with open(path, "wb") as f:
        f.write(weight_file_bytes(entries, model_tag))


def write_tensor_file(arr: np.ndarray, path) -> None:
    with open(path, "wb") as f:
        f.write(tensor_file_bytes(arr))
