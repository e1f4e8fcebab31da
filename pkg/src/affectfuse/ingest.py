"""Audio decoding, resampling, and CSV manifest / score-file parsing."""

from __future__ import annotations

import csv
import enum
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

CANONICAL_RATE = 16000
SPLITS = ("train", "validation", "test")

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class EmotionLabel(enum.IntEnum):
    """The seven basic emotions, encoded in confusion-table order."""

    AN = 0
    DI = 1
    FE = 2
    HA = 3
    NE = 4
    SA = 5
    SU = 6

    @property
    def full_name(self) -> str:
        return _FULL_NAMES[self]

    @classmethod
    def parse(cls, token: str) -> "EmotionLabel":
        key = token.strip().lower()
        try:
            return _LABEL_TOKENS[key]
        except KeyError:
            raise ValueError(f"unknown emotion label {token!r}") from None


_FULL_NAMES = {
    EmotionLabel.AN: "anger",
    EmotionLabel.DI: "disgust",
    EmotionLabel.FE: "fear",
    EmotionLabel.HA: "happiness",
    EmotionLabel.NE: "neutral",
    EmotionLabel.SA: "sad",
    EmotionLabel.SU: "surprise",
}
_LABEL_TOKENS = {lab.name.lower(): lab for lab in EmotionLabel}
_LABEL_TOKENS.update({name: lab for lab, name in _FULL_NAMES.items()})

LABEL_CODES = tuple(lab.name for lab in EmotionLabel)
N_CLASSES = len(LABEL_CODES)


class AudioError(Exception):
    """Base class for audio decoding failures."""


class UnreadableAudioError(AudioError):
    """File is missing, truncated, or not a RIFF/WAVE container."""


class UnsupportedFormatError(AudioError):
    """WAV codec, bit depth, or channel count outside what we decode."""


class EmptyAudioError(AudioError):
    """The data chunk holds no sample frames."""


class ManifestError(ValueError):
    pass


class ScoreFileError(ValueError):
    pass


@dataclass
class AudioClip:
    clip_id: str
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = np.asarray(self.samples, dtype=np.float64)

    @property
    def duration_ms(self) -> int:
        return (1000 * len(self.samples)) // self.sample_rate


# ---------------------------------------------------------------------------
# WAV


def _read_chunks(data: bytes, path: str) -> dict[bytes, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise UnreadableAudioError(f"{path}: not a RIFF/WAVE file")
    chunks: dict[bytes, bytes] = {}
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) < size and cid != b"data":
            raise UnreadableAudioError(f"{path}: truncated {cid!r} chunk")
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)
    return chunks


def decode_wav(path: str | Path, clip_id: str | None = None) -> AudioClip:
    """Decode a PCM/float WAV file into a mono clip with samples in [-1, 1].

    Stereo is downmixed by averaging the two channels. Integer samples are
    divided by the magnitude of the type's most negative value (128, 32768,
    8388608), 32-bit float samples are clipped into range.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise UnreadableAudioError(f"{path}: {exc.strerror or exc}") from exc
    chunks = _read_chunks(raw, str(path))
    if b"fmt " not in chunks or b"data" not in chunks:
        raise UnreadableAudioError(f"{path}: missing fmt or data chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise UnreadableAudioError(f"{path}: fmt chunk too short")
    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == _WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 26:
        # first two bytes of the sub-format GUID carry the real format tag
        tag = struct.unpack_from("<H", fmt, 24)[0]

    if tag == _WAVE_FORMAT_PCM and bits in (8, 16, 24):
        kind = "int"
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        kind = "float"
    else:
        raise UnsupportedFormatError(
            f"{path}: unsupported encoding (format tag {tag:#06x}, {bits}-bit)"
        )
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{path}: {channels} channels (expected 1 or 2)")
    if rate <= 0:
        raise UnreadableAudioError(f"{path}: invalid sample rate {rate}")

    width = bits // 8
    frame_bytes = width * channels
    body = chunks[b"data"]
    n_frames = len(body) // frame_bytes
    if n_frames == 0:
        raise EmptyAudioError(f"{path}: zero-length audio stream")
    body = body[: n_frames * frame_bytes]

    if kind == "float":
        values = np.frombuffer(body, dtype="<f4").astype(np.float64)
        values = np.clip(np.nan_to_num(values, nan=0.0), -1.0, 1.0)
    elif bits == 8:
        values = (np.frombuffer(body, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits == 16:
        values = np.frombuffer(body, dtype="<i2").astype(np.float64) / 32768.0
    else:
        b = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        values = ints.astype(np.float64) / float(1 << 23)

    values = values.reshape(n_frames, channels)
    mono = values[:, 0] if channels == 1 else values.mean(axis=1)
    return AudioClip(clip_id or path.stem, mono, int(rate))


def write_wav(
    path: str | Path,
    samples: np.ndarray,
    sample_rate: int,
    bits: int = 16,
    float_format: bool = False,
) -> None:
    """Write mono (1-D) or multichannel (frames x channels) samples as WAV."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    channels = arr.shape[1]
    if float_format:
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
        payload = arr.astype("<f4").tobytes()
    else:
        tag = _WAVE_FORMAT_PCM
        if bits == 8:
            q = np.clip(np.round(arr * 128.0) + 128, 0, 255).astype(np.uint8)
            payload = q.tobytes()
        elif bits == 16:
            payload = np.clip(np.round(arr * 32768.0), -32768, 32767).astype("<i2").tobytes()
        elif bits == 24:
            q = np.clip(np.round(arr * 8388608.0), -8388608, 8388607).astype(np.int32)
            q = q.reshape(-1).astype("<i4").view(np.uint8).reshape(-1, 4)[:, :3]
            payload = q.tobytes()
        else:
            raise ValueError(f"cannot write {bits}-bit integer PCM")
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, sample_rate, sample_rate * block, block, bits)
    out = io.BytesIO()
    out.write(b"RIFF")
    out.write(struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(payload) + (len(payload) & 1)))
    out.write(b"WAVE")
    out.write(b"fmt " + struct.pack("<I", len(fmt)) + fmt)
    out.write(b"data" + struct.pack("<I", len(payload)) + payload)
    if len(payload) & 1:
        out.write(b"\x00")
    Path(path).write_bytes(out.getvalue())


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling; returns an identical copy when rates match."""
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.clip_id, clip.samples.copy(), clip.sample_rate)
    n_in = len(clip.samples)
    n_out = max(1, int(round(n_in * target_rate / clip.sample_rate)))
    # exact rational positions keep integer-ratio decimation on the source grid
    pos = np.arange(n_out, dtype=np.float64) * clip.sample_rate / target_rate
    out = np.interp(pos, np.arange(n_in, dtype=np.float64), clip.samples)
    return AudioClip(clip.clip_id, out, target_rate)


def load_clip(path: str | Path, clip_id: str | None = None, rate: int = CANONICAL_RATE) -> AudioClip:
    return resample(decode_wav(path, clip_id), rate)


# ---------------------------------------------------------------------------
# Manifests


@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    split: str
    label: EmotionLabel | None
    audio_path: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            if e.clip_id in seen:
                raise ManifestError(f"duplicate clip_id {e.clip_id!r}")
            seen.add(e.clip_id)
            if e.split not in SPLITS:
                raise ManifestError(f"unknown split {e.split!r} for clip {e.clip_id!r}")
            if e.split != "test" and e.label is None:
                raise ManifestError(f"{e.split} clip {e.clip_id!r} has no label")

    def split(self, name: str) -> list[ManifestEntry]:
        if name not in SPLITS:
            raise ManifestError(f"unknown split {name!r}")
        return [e for e in self.entries if e.split == name]

    def labels(self, split: str | None = None) -> dict[str, EmotionLabel]:
        entries = self.entries if split is None else self.split(split)
        return {e.clip_id: e.label for e in entries if e.label is not None}

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.audio_path)
        return p if p.is_absolute() else self.base_dir / p


MANIFEST_HEADER = ["clip_id", "split", "label", "audio_path"]
SCORE_HEADER = ["clip_id", *LABEL_CODES]


def _check_header(header: list[str] | None, expected: list[str], path: Path, err: type) -> None:
    if header is None:
        raise err(f"{path}: empty file (header required)")
    if [h.strip() for h in header] != expected:
        raise err(f"{path}: header must be {','.join(expected)}, got {','.join(header)}")


def parse_manifest(path: str | Path) -> DatasetManifest:
    """Read a clip_id,split,label,audio_path CSV.

    Relative audio paths resolve against the manifest's directory.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), MANIFEST_HEADER, path, ManifestError)
        entries = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ManifestError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            clip_id, split, label, audio = (c.strip() for c in row)
            split = split.lower()
            if split not in SPLITS:
                raise ManifestError(f"{path}:{lineno}: unknown split {split!r}")
            try:
                lab = EmotionLabel.parse(label) if label else None
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
            entries.append(ManifestEntry(clip_id, split, lab, audio))
    return DatasetManifest(entries, base_dir=path.parent)


def write_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for e in manifest.entries:
            w.writerow([e.clip_id, e.split, e.label.name if e.label is not None else "", e.audio_path])


# ---------------------------------------------------------------------------
# Score files


@dataclass
class ExternalScoreSet:
    """Per-clip 7-way class scores emitted by one model."""

    model_id: str
    scores: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        for cid, vec in self.scores.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (N_CLASSES,) or not np.all(np.isfinite(vec)):
                raise ScoreFileError(f"model {self.model_id}: bad score vector for {cid!r}")
            self.scores[cid] = vec


def parse_scores(path: str | Path, model_id: str | None = None) -> ExternalScoreSet:
    path = Path(path)
    scores: dict[str, np.ndarray] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), SCORE_HEADER, path, ScoreFileError)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SCORE_HEADER):
                raise ScoreFileError(
                    f"{path}:{lineno}: expected {len(SCORE_HEADER)} fields, got {len(row)}"
                )
            cid = row[0].strip()
            if cid in scores:
                raise ScoreFileError(f"{path}:{lineno}: duplicate clip_id {cid!r}")
            try:
                vec = np.array([float(c) for c in row[1:]])
            except ValueError:
                raise ScoreFileError(f"{path}:{lineno}: non-numeric score cell") from None
            if not np.all(np.isfinite(vec)):
                raise ScoreFileError(f"{path}:{lineno}: non-finite score")
            scores[cid] = vec
    return ExternalScoreSet(model_id or path.stem, scores)


def write_scores(path: str | Path, score_set: ExternalScoreSet, order: Iterable[str] | None = None) -> None:
    ids = list(order) if order is not None else list(score_set.scores)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_HEADER)
        for cid in ids:
            w.writerow([cid, *(repr(float(v)) for v in score_set.scores[cid])])


def read_predictions(path: str | Path) -> dict[str, EmotionLabel]:
    """Read a clip_id,label CSV of hard predictions."""
    path = Path(path)
    preds: dict[str, EmotionLabel] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return preds
        _check_header(header, ["clip_id", "label"], path, ManifestError)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ManifestError(f"{path}:{lineno}: expected 2 fields")
            if row[0] in preds:
                raise ManifestError(f"{path}:{lineno}: duplicate clip_id {row[0]!r}")
            try:
                preds[row[0].strip()] = EmotionLabel.parse(row[1])
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
    return preds


def write_predictions(path: str | Path, preds: Mapping[str, EmotionLabel]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip_id", "label"])
        for cid, lab in preds.items():
            w.writerow([cid, EmotionLabel(lab).name])
