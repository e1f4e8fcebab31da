from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ingest import N_CLASSES


class DimensionMismatchError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


@dataclass
class Standardizer:
    """Per-dimension z-scoring fitted on training data; zero-variance dims keep std 1."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(mean, std)

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    """Map raw per-class scores onto the probability simplex.

    Nonnegative vectors with positive mass are divided by their sum (a
    no-op on probabilities); anything else goes through a softmax. Both
    branches preserve the argmax under positive rescaling.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.shape[-1] != N_CLASSES:
        raise DimensionMismatchError(f"score vectors need {N_CLASSES} entries, got {s.shape[-1]}")
    if s.ndim == 1:
        total = s.sum()
        if np.all(s >= 0) and total > 0:
            return s / total
        return softmax(s)
    return np.stack([normalize_scores(row) for row in s])
