"""AFMD1 model files.

Layout: ``b"AFMD1"``, u8 format version, u32 header length, a UTF-8 JSON
header (sorted keys) that lists every tensor's name and shape in storage
order, then the tensors as little-endian float64, row-major.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"AFMD1"
FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


def write_container(path: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    names = list(tensors)
    header = dict(meta)
    header["tensors"] = [{"name": n, "shape": list(np.shape(tensors[n]))} for n in names]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<BI", FORMAT_VERSION, len(blob)), blob]
    parts += [np.ascontiguousarray(tensors[n], dtype="<f8").tobytes() for n in names]
    Path(path).write_bytes(b"".join(parts))


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise ModelFileError(f"{path}: not an AFMD1 model file")
    if len(data) < 10:
        raise ModelFileError(f"{path}: truncated header")
    version, hlen = struct.unpack_from("<BI", data, 5)
    if version != FORMAT_VERSION:
        raise ModelFileError(f"{path}: unsupported model format version {version}")
    start = 10
    if start + hlen > len(data):
        raise ModelFileError(f"{path}: header length {hlen} exceeds file size")
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"{path}: corrupt header ({exc})") from None
    if not isinstance(header, dict) or not isinstance(header.get("tensors"), list):
        raise ModelFileError(f"{path}: header lacks a tensor table")
    offset = start + hlen
    tensors = {}
    for spec in header.pop("tensors"):
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(data):
            raise ModelFileError(f"{path}: truncated tensor {spec['name']!r}")
        tensors[spec["name"]] = np.frombuffer(data[offset:end], dtype="<f8").reshape(shape).astype(np.float64)
        offset = end
    if offset != len(data):
        raise ModelFileError(f"{path}: {len(data) - offset} trailing bytes")
    return header, tensors
