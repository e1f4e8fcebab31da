"""One-vs-rest linear SVM trained with Pegasos-style stochastic subgradient steps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..ingest import N_CLASSES, EmotionLabel
from .common import DimensionMismatchError, Standardizer, softmax


@dataclass
class SvmHyperParams:
    lam: float = 1e-3
    epochs: int = 60
    seed: int = 0


@dataclass
class LinearSvmModel:
    weights: np.ndarray  # (7, D)
    biases: np.ndarray  # (7,)
    standardizer: Standardizer
    hyperparams: SvmHyperParams = field(default_factory=SvmHyperParams)
    history: list[tuple[int, float]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionMismatchError(f"model expects {self.dim} dims, got {x.shape[-1]}")
        return self.standardizer.transform(x) @ self.weights.T + self.biases


def _as_array(vec) -> np.ndarray:
    return np.asarray(getattr(vec, "values", vec), dtype=np.float64)


def svm_objective(W: np.ndarray, Z: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Per-class lam/2 ||w||^2 + mean hinge; W includes the bias column."""
    margins = Y * (Z @ W.T)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0)
    return 0.5 * lam * np.sum(W * W, axis=1) + hinge


def train_svm(
    samples: Sequence[tuple[object, EmotionLabel]], hyperparams: SvmHyperParams | None = None
) -> LinearSvmModel:
    """Fit 7 binary hinge-loss classifiers on standardized inputs.

    Each epoch walks the same seeded permutation of the data with step size
    1/(lam*t). Subgradient steps do not decrease the objective monotonically,
    so the lowest-objective iterate seen at an epoch boundary is kept per
    class and returned.
    """
    hp = hyperparams or SvmHyperParams()
    if not samples:
        raise ValueError("empty training set")
    rows = [_as_array(v) for v, _ in samples]
    dims = {r.shape for r in rows}
    if len(dims) != 1:
        raise DimensionMismatchError(f"training vectors have mixed shapes {sorted(dims)}")
    X = np.vstack(rows)
    labels = np.array([int(lab) for _, lab in samples])
    if len(set(labels.tolist())) < 2:
        raise ValueError("training set must contain at least two distinct labels")

    std = Standardizer.fit(X)
    Z = np.hstack([std.transform(X), np.ones((len(X), 1))])
    Y = np.where(labels[:, None] == np.arange(N_CLASSES)[None, :], 1.0, -1.0)

    n, d = Z.shape
    W = np.zeros((N_CLASSES, d))
    best_W = W.copy()
    best_obj = svm_objective(W, Z, Y, hp.lam)
    radius = 1.0 / np.sqrt(hp.lam)
    order = np.random.default_rng(hp.seed).permutation(n)
    history = []
    t = 0
    for epoch in range(1, hp.epochs + 1):
        for i in order:
            t += 1
            eta = 1.0 / (hp.lam * t)
            z, y = Z[i], Y[i]
            active = y * (W @ z) < 1.0
            W *= 1.0 - eta * hp.lam
            W[active] += eta * y[active, None] * z
            norms = np.linalg.norm(W, axis=1, keepdims=True)
            W *= np.minimum(1.0, radius / np.maximum(norms, 1e-300))
        obj = svm_objective(W, Z, Y, hp.lam)
        better = obj < best_obj
        best_W[better] = W[better]
        best_obj = np.where(better, obj, best_obj)
        history.append((epoch, float(best_obj.sum())))

    return LinearSvmModel(best_W[:, :-1].copy(), best_W[:, -1].copy(), std, hp, history)


def predict_svm(model: LinearSvmModel, vec) -> np.ndarray:
    """Softmax over the 7 one-vs-rest decision values."""
    return softmax(model.decision_values(_as_array(vec)))
