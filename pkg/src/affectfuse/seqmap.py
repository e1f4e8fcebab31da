"""Sequence-length padding, holistic functionals and image-like tile maps."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import AudioClip
from .stfeat import FeatureSequence, featurize_clip

__all__ = [
    "FeatureSequence",
    "HolisticVector",
    "MapSequence",
    "FUNCTIONALS",
    "pad_min_length",
    "summarize_holistic",
    "build_column_map",
    "padded_width",
    "pad_columns",
    "tile_map",
    "pad_tile_sequence",
    "maps_for_clip",
]

TILE_SIDE = 34
TILE_STRIDE = 17
MIN_TILES = 8
MIN_SEQ_LEN = 16


def _skewness(x: np.ndarray) -> np.ndarray:
    d = x - x.mean(axis=0)
    m2 = np.mean(d**2, axis=0)
    m3 = np.mean(d**3, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = m3 / m2**1.5
    return np.where(m2 > 0, out, 0.0)


def _kurtosis(x: np.ndarray) -> np.ndarray:
    # excess (Fisher) kurtosis, 0 for constant dimensions
    d = x - x.mean(axis=0)
    m2 = np.mean(d**2, axis=0)
    m4 = np.mean(d**4, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = m4 / m2**2 - 3.0
    return np.where(m2 > 0, out, 0.0)


FUNCTIONALS = {
    "mean": lambda x: x.mean(axis=0),
    "std": lambda x: x.std(axis=0),
    "min": lambda x: x.min(axis=0),
    "max": lambda x: x.max(axis=0),
    "median": lambda x: np.median(x, axis=0),
    "p25": lambda x: np.percentile(x, 25, axis=0),
    "p75": lambda x: np.percentile(x, 75, axis=0),
    "range": lambda x: x.max(axis=0) - x.min(axis=0),
    "skewness": _skewness,
    "kurtosis": _kurtosis,
}
DEFAULT_FUNCTIONALS = tuple(FUNCTIONALS)


@dataclass
class HolisticVector:
    clip_id: str
    values: np.ndarray
    functional_names: tuple[str, ...]


@dataclass
class MapSequence:
    clip_id: str
    tiles: np.ndarray  # (T, 34, side)
    pre_pad_tile_count: int

    def __len__(self) -> int:
        return self.tiles.shape[0]


def pad_min_length(seq: FeatureSequence, min_len: int = MIN_SEQ_LEN) -> FeatureSequence:
    """Replicate the last vector until the sequence holds at least ``min_len`` frames."""
    n = len(seq)
    if n >= min_len:
        return seq
    tail = np.repeat(seq.vectors[-1:], min_len - n, axis=0)
    return FeatureSequence(seq.clip_id, np.vstack([seq.vectors, tail]), seq.original_length)


def summarize_holistic(
    seq: FeatureSequence, functionals: Sequence[str] = DEFAULT_FUNCTIONALS
) -> HolisticVector:
    """Apply each functional per feature dimension; functional-major layout (F*34)."""
    unknown = [f for f in functionals if f not in FUNCTIONALS]
    if unknown:
        raise ValueError(f"unknown functional(s): {', '.join(unknown)}")
    x = seq.vectors[: seq.original_length]
    values = np.concatenate([FUNCTIONALS[f](x) for f in functionals])
    return HolisticVector(seq.clip_id, values, tuple(functionals))


def build_column_map(seq: FeatureSequence) -> np.ndarray:
    """34 x n matrix whose column j is frame j's feature vector."""
    return seq.vectors.T.copy()


def padded_width(n: int, side: int = TILE_SIDE, stride: int = TILE_STRIDE) -> int:
    """Smallest multiple of ``stride`` that is >= max(n, side)."""
    target = max(n, side)
    return -(-target // stride) * stride


def pad_columns(matrix: np.ndarray, side: int = TILE_SIDE, stride: int = TILE_STRIDE) -> tuple[np.ndarray, int]:
    n = matrix.shape[1]
    if n < 1:
        raise ValueError("map must have at least one column")
    n_padded = padded_width(n, side, stride)
    if n_padded == n:
        return matrix, n
    tail = np.repeat(matrix[:, -1:], n_padded - n, axis=1)
    return np.hstack([matrix, tail]), n_padded


def tile_map(matrix: np.ndarray, side: int = TILE_SIDE, stride: int = TILE_STRIDE) -> list[np.ndarray]:
    """Cut the padded map into side-wide tiles at the given column stride."""
    n = matrix.shape[1]
    if n < side or n % stride:
        raise ValueError(f"map width {n} must be a multiple of {stride} and >= {side}")
    count = (n - side) // stride + 1
    return [matrix[:, t * stride : t * stride + side] for t in range(count)]


def pad_tile_sequence(tiles: Sequence[np.ndarray], min_len: int = MIN_TILES, clip_id: str = "") -> MapSequence:
    if len(tiles) == 0:
        raise ValueError("tile sequence is empty")
    stack = np.stack(tiles)
    original = len(tiles)
    if len(tiles) < min_len:
        stack = np.concatenate([stack, np.repeat(stack[-1:], min_len - len(tiles), axis=0)])
    return MapSequence(clip_id, stack, original)


def maps_from_sequence(
    seq: FeatureSequence, side: int = TILE_SIDE, stride: int = TILE_STRIDE, min_tiles: int = MIN_TILES
) -> MapSequence:
    # maps are built from the raw (unpadded) sequence
    raw = FeatureSequence(seq.clip_id, seq.vectors[: seq.original_length])
    padded, _ = pad_columns(build_column_map(raw), side, stride)
    return pad_tile_sequence(tile_map(padded, side, stride), min_tiles, clip_id=seq.clip_id)


def maps_for_clip(
    clip: AudioClip,
    window_ms: int = 100,
    step_ms: int = 50,
    side: int = TILE_SIDE,
    stride: int = TILE_STRIDE,
    min_tiles: int = MIN_TILES,
) -> MapSequence:
    return maps_from_sequence(featurize_clip(clip, window_ms, step_ms), side, stride, min_tiles)


# ---------------------------------------------------------------------------
# map dumps

MAP_MAGIC = b"AFM1"


def write_map_binary(path: str | Path, maps: MapSequence) -> None:
    """Header: magic AFM1, u32 tile count, u32 rows, u32 cols; then row-major LE float32 tiles."""
    t, rows, cols = maps.tiles.shape
    header = MAP_MAGIC + struct.pack("<III", t, rows, cols)
    Path(path).write_bytes(header + np.ascontiguousarray(maps.tiles, dtype="<f4").tobytes())


def read_map_binary(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MAP_MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}")
    t, rows, cols = struct.unpack_from("<III", data, 4)
    body = np.frombuffer(data, dtype="<f4", offset=16)
    if body.size != t * rows * cols:
        raise ValueError(f"{path}: expected {t * rows * cols} values, found {body.size}")
    return body.reshape(t, rows, cols).astype(np.float64)


def write_tile_csv(path: str | Path, tile: np.ndarray) -> None:
    np.savetxt(path, tile, delimiter=",", fmt="%.9g")
