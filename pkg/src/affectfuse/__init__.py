"""Audio-channel emotion classification: features, maps, classifiers, fusion, metrics."""

from .ingest import AudioClip, EmotionLabel, ExternalScoreSet, decode_wav, parse_manifest, parse_scores, resample

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "EmotionLabel",
    "ExternalScoreSet",
    "decode_wav",
    "parse_manifest",
    "parse_scores",
    "resample",
]
