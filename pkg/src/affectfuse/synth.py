"""Labelled synthetic tone/noise corpus for end-to-end runs.

Each class gets its own base pitch, amplitude-modulation rate and noise
level; per-clip jitter makes neighbouring classes overlap so that the
audio models do not all score perfectly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ingest import DatasetManifest, EmotionLabel, ManifestEntry, write_manifest, write_wav

BASE_HZ = np.array([180.0, 260.0, 340.0, 420.0, 500.0, 580.0, 660.0])
AM_HZ = np.array([2.0, 3.5, 5.0, 6.5, 8.0, 9.5, 11.0])
NOISE = np.array([0.05, 0.30, 0.15, 0.08, 0.02, 0.20, 0.12])


def synth_clip(label: int, rng: np.random.Generator, duration_ms: int, rate: int, jitter: float) -> np.ndarray:
    n = duration_ms * rate // 1000
    t = np.arange(n) / rate
    f0 = BASE_HZ[label] * (1.0 + jitter * rng.normal())
    am = AM_HZ[label] * (1.0 + jitter * rng.normal())
    sweep = 1.0 + 0.1 * (label % 3 - 1) * t / max(t[-1], 1e-9)
    phase = 2 * np.pi * np.cumsum(f0 * sweep) / rate
    tone = np.sin(phase) + 0.4 * np.sin(2 * phase + rng.uniform(0, 2 * np.pi))
    env = 0.6 + 0.4 * np.sin(2 * np.pi * am * t + rng.uniform(0, 2 * np.pi))
    noise = NOISE[label] * (1.0 + jitter * abs(rng.normal())) * rng.normal(size=n)
    x = env * tone + noise
    return 0.5 * x / max(1e-9, float(np.max(np.abs(x))))


def make_corpus(
    out_dir: str | Path,
    per_class: dict[str, int] | None = None,
    seed: int = 0,
    rate: int = 16000,
    min_ms: int = 600,
    max_ms: int = 2000,
    jitter: float = 0.12,
) -> DatasetManifest:
    """Write WAVs plus manifest.csv into ``out_dir``; returns the manifest.

    ``per_class`` maps split name to clips per class, e.g.
    ``{"train": 6, "validation": 3, "test": 2}``.
    """
    per_class = per_class or {"train": 6, "validation": 3, "test": 2}
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for split, count in per_class.items():
        for k in range(count):
            for lab in EmotionLabel:
                cid = f"{split[:3]}_{lab.name}_{k:03d}"
                dur = int(rng.integers(min_ms, max_ms + 1))
                write_wav(out / "audio" / f"{cid}.wav", synth_clip(int(lab), rng, dur, rate, jitter), rate)
                label = None if split == "test" else lab
                entries.append(ManifestEntry(cid, split, label, f"audio/{cid}.wav"))
    manifest = DatasetManifest(entries, base_dir=out)
    write_manifest(out / "manifest.csv", manifest)
    # test labels kept aside for offline scoring
    with open(out / "test_labels.csv", "w", encoding="utf-8") as fh:
        fh.write("clip_id,label\n")
        for e in entries:
            if e.split == "test":
                fh.write(f"{e.clip_id},{e.clip_id.split('_')[1]}\n")
    return manifest
