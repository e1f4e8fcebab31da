"""Weighted late fusion of per-model class scores and simplex-lattice grid search."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .ingest import EmotionLabel, ExternalScoreSet
from .models.common import normalize_scores


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class FusionWeights:
    weights: dict[str, float]
    grid_resolution: int

    def __post_init__(self) -> None:
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise FusionError(f"fusion weights sum to {total}, expected 1")
        g = self.grid_resolution
        for mid, w in self.weights.items():
            if not 0.0 <= w <= 1.0 or abs(w * g - round(w * g)) > 1e-9:
                raise FusionError(f"weight {w} for {mid!r} is not a multiple of 1/{g} in [0, 1]")


@dataclass
class FusionResult:
    best_weights: FusionWeights
    validation_accuracy: float
    evaluated_points: int
    per_point_log: list[tuple[dict[str, float], float]] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "weights": dict(self.best_weights.weights),
            "validation_accuracy": self.validation_accuracy,
            "evaluated_points": self.evaluated_points,
        }


def lattice_size(k: int, grid: int) -> int:
    return comb(grid + k - 1, k - 1)


def _compositions(k: int, total: int):
    if k == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(k - 1, total - first):
            yield (first, *rest)


def enumerate_simplex(k: int, grid: int) -> list[tuple[float, ...]]:
    """All k-tuples of multiples of 1/grid summing to 1, lexicographically ascending."""
    if k < 1 or grid < 1:
        raise ValueError(f"need k >= 1 and grid >= 1, got k={k}, grid={grid}")
    return [tuple(c / grid for c in comp) for comp in _compositions(k, grid)]


def _stack_scores(score_sets: Sequence[ExternalScoreSet], clip_ids: Sequence[str]) -> np.ndarray:
    missing = {}
    for s in score_sets:
        lost = [cid for cid in clip_ids if cid not in s.scores]
        if lost:
            missing[s.model_id] = lost
    if missing:
        detail = "; ".join(f"{mid} lacks {', '.join(ids)}" for mid, ids in missing.items())
        raise FusionError(f"score sets do not cover all clips: {detail}")
    return np.stack([normalize_scores(np.stack([s.scores[cid] for cid in clip_ids])) for s in score_sets])


def _fused_argmax(W: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Predictions for each weight row of W (P, k) over stacked scores S (k, N, 7).

    The weighted sum is accumulated model by model so that a single weight
    vector and a batch of them produce bitwise-identical fused scores.
    """
    acc = W[:, 0, None, None] * S[0][None]
    for m in range(1, S.shape[0]):
        acc = acc + W[:, m, None, None] * S[m][None]
    return np.argmax(acc, axis=-1)  # first maximum -> lowest class index


def _ordered(score_sets: Sequence[ExternalScoreSet]) -> list[ExternalScoreSet]:
    ids = [s.model_id for s in score_sets]
    if len(set(ids)) != len(ids):
        raise FusionError(f"duplicate model ids: {ids}")
    return sorted(score_sets, key=lambda s: s.model_id)


def fuse(
    score_sets: Sequence[ExternalScoreSet],
    weights: FusionWeights | Mapping[str, float],
    clip_ids: Sequence[str],
) -> dict[str, EmotionLabel]:
    wmap = weights.weights if isinstance(weights, FusionWeights) else dict(weights)
    sets = _ordered(score_sets)
    if set(wmap) != {s.model_id for s in sets}:
        raise FusionError(f"weights cover {sorted(wmap)}, models are {[s.model_id for s in sets]}")
    clip_ids = list(clip_ids)
    S = _stack_scores(sets, clip_ids)
    W = np.array([[wmap[s.model_id] for s in sets]], dtype=np.float64)
    pred = _fused_argmax(W, S)[0]
    return {cid: EmotionLabel(int(p)) for cid, p in zip(clip_ids, pred)}


def grid_search(
    score_sets: Sequence[ExternalScoreSet],
    labels: Mapping[str, EmotionLabel],
    grid: int = 20,
    keep_log: bool = False,
    chunk: int = 512,
) -> FusionResult:
    """Exhaustive search of the weight simplex for the best overall accuracy.

    Models are ordered by model_id; accuracy ties go to the first lattice
    point in enumeration order.
    """
    if not score_sets:
        raise FusionError("need at least one score set")
    if not labels:
        raise FusionError("no labelled clips to evaluate")
    sets = _ordered(score_sets)
    clip_ids = sorted(labels)
    S = _stack_scores(sets, clip_ids)
    truth = np.array([int(labels[c]) for c in clip_ids])
    lattice = np.array(enumerate_simplex(len(sets), grid), dtype=np.float64)
    n = len(clip_ids)
    correct = np.empty(len(lattice), dtype=np.int64)
    for start in range(0, len(lattice), chunk):
        W = lattice[start : start + chunk]
        correct[start : start + len(W)] = (_fused_argmax(W, S) == truth[None]).sum(axis=1)
    best = int(np.argmax(correct))
    ids = [s.model_id for s in sets]
    best_weights = FusionWeights({m: float(w) for m, w in zip(ids, lattice[best])}, grid)
    log = None
    if keep_log:
        log = [({m: float(w) for m, w in zip(ids, row)}, int(c) / n) for row, c in zip(lattice, correct)]
    return FusionResult(best_weights, int(correct[best]) / n, len(lattice), log)


def write_result_json(path: str | Path, result: FusionResult) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_lattice_log(path: str | Path, result: FusionResult) -> None:
    if result.per_point_log is None:
        raise FusionError("result was computed without keep_log=True")
    ids = list(result.best_weights.weights)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ids, "accuracy"])
        for weights, acc in result.per_point_log:
            w.writerow([*(repr(weights[m]) for m in ids), repr(acc)])
