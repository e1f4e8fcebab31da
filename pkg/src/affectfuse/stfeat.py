"""Framing and the 34-dimensional short-term feature bank.

Layout of one feature vector::

    0  zero-crossing rate          8..20  MFCC 1-13
    1  energy                      21..32 chroma classes 1-12
    2  energy entropy              33     chroma deviation
    3  spectral centroid
    4  spectral spread
    5  spectral entropy
    6  spectral flux
    7  spectral roll-off

All spectral features operate on the magnitude of the real FFT of the
un-windowed frame (bins 0..N/2, FFT length = frame length).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.fft import dct

from .ingest import AudioClip

N_FEATURES = 34
N_MFCC = 13
N_MEL_FILTERS = 26
N_CHROMA = 12
ENTROPY_BLOCKS = 10
ROLLOFF_FRACTION = 0.90
LOG_FLOOR = 1e-10
CHROMA_MIN_HZ = 10.0

FEATURE_NAMES = (
    ["zcr", "energy", "energy_entropy", "spectral_centroid", "spectral_spread",
     "spectral_entropy", "spectral_flux", "spectral_rolloff"]
    + [f"mfcc_{i}" for i in range(1, N_MFCC + 1)]
    + [f"chroma_{i}" for i in range(1, N_CHROMA + 1)]
    + ["chroma_deviation"]
)
IDX_ZCR, IDX_ENERGY, IDX_ENERGY_ENTROPY = 0, 1, 2
IDX_CENTROID, IDX_SPREAD, IDX_SPECTRAL_ENTROPY = 3, 4, 5
IDX_FLUX, IDX_ROLLOFF = 6, 7
MFCC_SLICE = slice(8, 21)
CHROMA_SLICE = slice(21, 33)
IDX_CHROMA_DEV = 33


class ClipTooShortError(ValueError):
    pass


@dataclass
class Frame:
    samples: np.ndarray
    index: int
    start_ms: int
    sample_rate: int = 16000


def frame_count(duration_ms: int, window_ms: int = 100, step_ms: int = 50) -> int:
    """Number of full windows that fit; (m - 50) // 50 at the 100/50 defaults."""
    if duration_ms < window_ms:
        return 0
    return (duration_ms - window_ms) // step_ms + 1


def frame_signal(clip: AudioClip, window_ms: int = 100, step_ms: int = 50) -> list[Frame]:
    if not (window_ms >= step_ms > 0):
        raise ValueError(f"need window_ms >= step_ms > 0, got {window_ms}/{step_ms}")
    n = frame_count(clip.duration_ms, window_ms, step_ms)
    if n == 0:
        raise ClipTooShortError(
            f"clip {clip.clip_id!r} is {clip.duration_ms} ms, shorter than one {window_ms} ms window"
        )
    rate = clip.sample_rate
    win = int(round(window_ms * rate / 1000))
    frames = []
    for k in range(n):
        start = int(round(k * step_ms * rate / 1000))
        if start + win > len(clip.samples):
            break  # only reachable when ms -> sample rounding is inexact
        frames.append(Frame(clip.samples[start : start + win], k, k * step_ms, rate))
    return frames


# ---------------------------------------------------------------------------
# individual features


def zero_crossing_rate(x: np.ndarray) -> float:
    if len(x) < 2:
        return 0.0
    s = np.sign(x)
    changes = np.count_nonzero(s[1:] * s[:-1] < 0)
    return changes / (len(x) - 1)


def energy(x: np.ndarray) -> float:
    return float(np.mean(x * x))


def _entropy_of_blocks(values: np.ndarray, blocks: int) -> float:
    parts = np.array([p.sum() for p in np.array_split(values, blocks)])
    total = parts.sum()
    if total <= 0:
        return 0.0
    p = parts / total
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def energy_entropy(x: np.ndarray, blocks: int = ENTROPY_BLOCKS) -> float:
    return _entropy_of_blocks(x * x, blocks)


def magnitude_spectrum(x: np.ndarray) -> np.ndarray:
    return np.abs(np.fft.rfft(x))


def bin_frequencies(n_fft: int, sample_rate: int) -> np.ndarray:
    return np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)


def centroid_and_spread(X: np.ndarray, n_fft: int) -> tuple[float, float]:
    total = X.sum()
    if total <= 0:
        return 0.5, 0.0
    p = X / total
    rel = np.arange(len(X)) * (2.0 / n_fft)  # bin frequency over Nyquist
    c = float(np.sum(rel * p))
    spread = float(np.sqrt(np.sum((rel - c) ** 2 * p)))
    return c, spread


def spectral_entropy(X: np.ndarray, blocks: int = ENTROPY_BLOCKS) -> float:
    return _entropy_of_blocks(X * X, blocks)


def _normalized(X: np.ndarray) -> np.ndarray:
    total = X.sum()
    return X / total if total > 0 else np.zeros_like(X)


def spectral_flux(X: np.ndarray, X_prev: np.ndarray) -> float:
    if X_prev.shape != X.shape:
        raise ValueError(f"previous spectrum has {len(X_prev)} bins, expected {len(X)}")
    return float(np.sum((_normalized(X) - _normalized(X_prev)) ** 2))


def spectral_rolloff(X: np.ndarray, fraction: float = ROLLOFF_FRACTION) -> float:
    power = X * X
    total = power.sum()
    if total <= 0:
        return 0.0
    cum = np.cumsum(power)
    b = int(np.argmax(cum >= fraction * total))
    return b / len(X)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(n_fft: int, sample_rate: int, n_filters: int = N_MEL_FILTERS) -> np.ndarray:
    """Triangular filters (n_filters x bins) equally spaced on the mel scale, 0..Nyquist."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_filters + 2))
    freqs = bin_frequencies(n_fft, sample_rate)
    bank = np.zeros((n_filters, len(freqs)))
    for m in range(n_filters):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    bank.flags.writeable = False
    return bank


def mfcc(X: np.ndarray, n_fft: int, sample_rate: int, n_coeffs: int = N_MFCC) -> np.ndarray:
    energies = mel_filterbank(n_fft, sample_rate) @ (X * X)
    logs = np.log(np.maximum(energies, LOG_FLOOR))
    return dct(logs, type=2, norm="ortho")[:n_coeffs]


@lru_cache(maxsize=16)
def chroma_classes(n_fft: int, sample_rate: int) -> np.ndarray:
    """Pitch class (0 = A) for each bin, -1 for bins below 10 Hz."""
    freqs = bin_frequencies(n_fft, sample_rate)
    classes = np.full(len(freqs), -1, dtype=np.int64)
    ok = freqs >= CHROMA_MIN_HZ
    semis = np.floor(12.0 * np.log2(freqs[ok] / 440.0) + 0.5).astype(np.int64)
    classes[ok] = np.mod(semis, 12)
    classes.flags.writeable = False
    return classes


def chroma(X: np.ndarray, n_fft: int, sample_rate: int) -> np.ndarray:
    power = X * X
    total = power.sum()
    if total <= 0:
        return np.zeros(N_CHROMA)
    cls = chroma_classes(n_fft, sample_rate)
    keep = cls >= 0
    return np.bincount(cls[keep], weights=power[keep], minlength=N_CHROMA) / total


# ---------------------------------------------------------------------------


def extract_features(frame: Frame, prev_spectrum: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return (34-vector, magnitude spectrum) for one frame.

    Without a previous spectrum the flux is taken against the frame's own
    spectrum and is therefore 0.
    """
    x = np.asarray(frame.samples, dtype=np.float64)
    if len(x) < 2:
        raise ValueError("frame must hold at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"frame {frame.index} contains non-finite samples")
    n_fft = len(x)
    X = magnitude_spectrum(x)
    prev = X if prev_spectrum is None else np.asarray(prev_spectrum, dtype=np.float64)

    v = np.empty(N_FEATURES)
    v[IDX_ZCR] = zero_crossing_rate(x)
    v[IDX_ENERGY] = energy(x)
    v[IDX_ENERGY_ENTROPY] = energy_entropy(x)
    v[IDX_CENTROID], v[IDX_SPREAD] = centroid_and_spread(X, n_fft)
    v[IDX_SPECTRAL_ENTROPY] = spectral_entropy(X)
    v[IDX_FLUX] = spectral_flux(X, prev)
    v[IDX_ROLLOFF] = spectral_rolloff(X)
    v[MFCC_SLICE] = mfcc(X, n_fft, frame.sample_rate)
    ch = chroma(X, n_fft, frame.sample_rate)
    v[CHROMA_SLICE] = ch
    v[IDX_CHROMA_DEV] = float(np.std(ch))
    return v, X


@dataclass
class FeatureSequence:
    """Frame-ordered feature vectors of one clip (n x 34)."""

    clip_id: str
    vectors: np.ndarray
    original_length: int | None = None

    def __post_init__(self) -> None:
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if self.vectors.shape[0] == 0 or self.vectors.shape[1] != N_FEATURES:
            raise ValueError(f"feature sequence must be n x {N_FEATURES}, got {self.vectors.shape}")
        if self.original_length is None:
            self.original_length = self.vectors.shape[0]

    def __len__(self) -> int:
        return self.vectors.shape[0]


def featurize_clip(clip: AudioClip, window_ms: int = 100, step_ms: int = 50) -> FeatureSequence:
    prev = None
    rows = []
    for frame in frame_signal(clip, window_ms, step_ms):
        vec, prev = extract_features(frame, prev)
        rows.append(vec)
    return FeatureSequence(clip.clip_id, np.vstack(rows))


# ---------------------------------------------------------------------------
# feature dumps

FEATURE_MAGIC = b"AFF1"
FEATURE_CSV_HEADER = ["clip_id", "frame_index"] + [f"f{i:02d}" for i in range(N_FEATURES)]


def write_features_csv(path: str | Path, clip_id: str, vectors: np.ndarray) -> None:
    lines = [",".join(FEATURE_CSV_HEADER)]
    for i, row in enumerate(np.asarray(vectors, dtype=np.float64)):
        lines.append(",".join([clip_id, str(i), *(repr(float(v)) for v in row)]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_features_csv(path: str | Path) -> tuple[str, np.ndarray]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0].split(",") != FEATURE_CSV_HEADER:
        raise ValueError(f"{path}: not a feature CSV")
    rows = [line.split(",") for line in text[1:] if line]
    if not rows:
        raise ValueError(f"{path}: no frames")
    clip_id = rows[0][0]
    return clip_id, np.array([[float(c) for c in r[2:]] for r in rows])


def write_matrix_binary(path: str | Path, matrix: np.ndarray, magic: bytes = FEATURE_MAGIC) -> None:
    """16-byte header (magic, u32 rows, u32 cols, u32 reserved) + row-major LE float32."""
    m = np.asarray(matrix, dtype="<f4")
    rows, cols = m.shape
    Path(path).write_bytes(magic + struct.pack("<III", rows, cols, 0) + m.tobytes(order="C"))


def read_matrix_binary(path: str | Path, magic: bytes = FEATURE_MAGIC) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != magic:
        raise ValueError(f"{path}: bad magic {data[:4]!r}")
    rows, cols, _ = struct.unpack_from("<III", data, 4)
    body = np.frombuffer(data, dtype="<f4", offset=16)
    if body.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {body.size}")
    return body.reshape(rows, cols).astype(np.float64)
