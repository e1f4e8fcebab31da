"""Single-layer LSTM sequence classifier in numpy, trained with full BPTT.

Gate rows of ``Wx``/``Wh``/``b`` are stacked in the order input, forget,
output, candidate. The class readout is applied to the final hidden state.
"""

from __future__ import annotations

import copy
import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..ingest import N_CLASSES, EmotionLabel
from .common import DimensionMismatchError, Standardizer, TrainingDivergedError, softmax

log = logging.getLogger(__name__)

PARAM_NAMES = ("Wx", "Wh", "b", "Wy", "by")
_WEIGHT_NAMES = ("Wx", "Wh", "Wy")


@dataclass
class LstmHyperParams:
    learning_rate: float = 1e-3
    epochs: int = 30  # 0 = run until max_iterations
    clip_norm: float = 5.0
    batch_size: int = 16
    weight_decay: float = 0.0
    lr_step: int = 0  # iterations between decays, 0 disables the schedule
    lr_decay: float = 0.1
    max_iterations: int = 0  # 0 = bounded by epochs only
    seed: int = 0


@dataclass
class LstmModel:
    input_dim: int
    hidden_dim: int
    params: dict[str, np.ndarray]
    standardizer: Standardizer | None = None
    hyperparams: LstmHyperParams = field(default_factory=LstmHyperParams)
    history: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        h, d = self.hidden_dim, self.input_dim
        expected = {"Wx": (4 * h, d), "Wh": (4 * h, h), "b": (4 * h,), "Wy": (N_CLASSES, h), "by": (N_CLASSES,)}
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise DimensionMismatchError(f"{name} has shape {self.params[name].shape}, expected {shape}")


def init_lstm(input_dim: int, hidden_dim: int, seed: int = 0, scale: float = 0.01) -> LstmModel:
    """Weights uniform in [-scale, scale], biases zero."""
    rng = np.random.default_rng(seed)
    h = hidden_dim
    params = {
        "Wx": rng.uniform(-scale, scale, (4 * h, input_dim)),
        "Wh": rng.uniform(-scale, scale, (4 * h, h)),
        "b": np.zeros(4 * h),
        "Wy": rng.uniform(-scale, scale, (N_CLASSES, h)),
        "by": np.zeros(N_CLASSES),
    }
    return LstmModel(input_dim, hidden_dim, params)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmCache:
    xs: np.ndarray  # (T, I)
    hs: np.ndarray  # (T+1, H), hs[0] = 0
    cs: np.ndarray  # (T+1, H)
    gates: np.ndarray  # (T, 4H) post-activation i, f, o, g
    probs: np.ndarray


def lstm_forward(model: LstmModel, inputs) -> tuple[np.ndarray, LstmCache]:
    xs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if xs.shape[0] < 1:
        raise ValueError("sequence must have at least one step")
    if xs.shape[1] != model.input_dim:
        raise DimensionMismatchError(f"model expects {model.input_dim}-dim inputs, got {xs.shape[1]}")
    if not np.all(np.isfinite(xs)):
        raise ValueError("non-finite values in input sequence")
    p = model.params
    H = model.hidden_dim
    T = xs.shape[0]
    hs = np.zeros((T + 1, H))
    cs = np.zeros((T + 1, H))
    gates = np.empty((T, 4 * H))
    pre_x = xs @ p["Wx"].T + p["b"]
    for t in range(T):
        a = pre_x[t] + p["Wh"] @ hs[t]
        g = gates[t]
        g[: 3 * H] = _sigmoid(a[: 3 * H])
        g[3 * H :] = np.tanh(a[3 * H :])
        i, f, o, cand = g[:H], g[H : 2 * H], g[2 * H : 3 * H], g[3 * H :]
        cs[t + 1] = f * cs[t] + i * cand
        hs[t + 1] = o * np.tanh(cs[t + 1])
    probs = softmax(p["Wy"] @ hs[T] + p["by"])
    return probs, LstmCache(xs, hs, cs, gates, probs)


def lstm_backward(model: LstmModel, cache: LstmCache, label: int) -> tuple[float, dict[str, np.ndarray]]:
    """Cross-entropy loss of one sequence and its gradient w.r.t. every parameter."""
    p = model.params
    H = model.hidden_dim
    T = cache.xs.shape[0]
    loss = -float(np.log(max(cache.probs[label], 1e-300)))

    dlogits = cache.probs.copy()
    dlogits[label] -= 1.0
    grads = {name: np.zeros_like(val) for name, val in p.items()}
    grads["Wy"] = np.outer(dlogits, cache.hs[T])
    grads["by"] = dlogits
    dh = p["Wy"].T @ dlogits
    dc = np.zeros(H)
    dpre = np.empty((T, 4 * H))
    for t in reversed(range(T)):
        g = cache.gates[t]
        i, f, o, cand = g[:H], g[H : 2 * H], g[2 * H : 3 * H], g[3 * H :]
        tc = np.tanh(cache.cs[t + 1])
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * cand
        df = dc * cache.cs[t]
        dcand = dc * i
        da = dpre[t]
        da[:H] = di * i * (1.0 - i)
        da[H : 2 * H] = df * f * (1.0 - f)
        da[2 * H : 3 * H] = do * o * (1.0 - o)
        da[3 * H :] = dcand * (1.0 - cand * cand)
        dh = p["Wh"].T @ da
        dc = dc * f
    grads["Wx"] = dpre.T @ cache.xs
    grads["Wh"] = dpre.T @ cache.hs[:T]
    grads["b"] = dpre.sum(axis=0)
    return loss, grads


def sequence_loss(model: LstmModel, inputs, label: int) -> float:
    probs, _ = lstm_forward(model, inputs)
    return -float(np.log(max(probs[label], 1e-300)))


def _learning_rate(hp: LstmHyperParams, iteration: int) -> float:
    if hp.lr_step > 0:
        return hp.learning_rate * hp.lr_decay ** (iteration // hp.lr_step)
    return hp.learning_rate


def lstm_train(
    model: LstmModel,
    train: Sequence[tuple[np.ndarray, EmotionLabel]],
    hyperparams: LstmHyperParams | None = None,
    standardize: bool = True,
) -> LstmModel:
    """Minimize mean cross-entropy with Adam over seeded mini-batches.

    Gradients are clipped to a global L2 norm of ``clip_norm`` before each
    update; weight decay (L2, weights only) is added to the gradient. When
    ``standardize`` is set and the model has no standardizer yet, one is
    fitted on all training frames. The input model is not modified.
    """
    hp = hyperparams or LstmHyperParams()
    if not train:
        raise ValueError("empty training set")
    model = copy.deepcopy(model)
    model.hyperparams = hp
    seqs = [np.atleast_2d(np.asarray(s, dtype=np.float64)) for s, _ in train]
    labels = [int(lab) for _, lab in train]
    for s in seqs:
        if s.shape[1] != model.input_dim:
            raise DimensionMismatchError(f"model expects {model.input_dim}-dim inputs, got {s.shape[1]}")
    if standardize and model.standardizer is None:
        model.standardizer = Standardizer.fit(np.vstack(seqs))
    if model.standardizer is not None:
        seqs = [model.standardizer.transform(s) for s in seqs]

    params = model.params
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    rng = np.random.default_rng(hp.seed)
    iteration = 0
    history: list[tuple[int, float]] = []
    bs = max(1, hp.batch_size)
    if hp.epochs <= 0 and hp.max_iterations <= 0:
        raise ValueError("epochs = 0 requires max_iterations > 0")
    epochs = itertools.count(1) if hp.epochs <= 0 else range(1, hp.epochs + 1)
    for epoch in epochs:
        order = rng.permutation(len(seqs))
        total, seen = 0.0, 0
        for start in range(0, len(order), bs):
            batch = order[start : start + bs]
            acc = {k: np.zeros_like(val) for k, val in params.items()}
            for j in batch:
                _, cache = lstm_forward(model, seqs[j])
                loss, g = lstm_backward(model, cache, labels[j])
                total += loss
                seen += 1
                for k in acc:
                    acc[k] += g[k]
            for k in acc:
                acc[k] /= len(batch)
                if hp.weight_decay and k in _WEIGHT_NAMES:
                    acc[k] += hp.weight_decay * params[k]
            norm = np.sqrt(sum(float(np.sum(a * a)) for a in acc.values()))
            if not np.isfinite(norm):
                raise TrainingDivergedError(epoch, float("nan"))
            if hp.clip_norm > 0 and norm > hp.clip_norm:
                for k in acc:
                    acc[k] *= hp.clip_norm / norm
            lr = _learning_rate(hp, iteration)
            iteration += 1
            if lr != 0.0:
                for k in params:
                    m[k] = beta1 * m[k] + (1 - beta1) * acc[k]
                    v[k] = beta2 * v[k] + (1 - beta2) * acc[k] ** 2
                    mhat = m[k] / (1 - beta1**iteration)
                    vhat = v[k] / (1 - beta2**iteration)
                    params[k] -= lr * mhat / (np.sqrt(vhat) + eps)
            if hp.max_iterations and iteration >= hp.max_iterations:
                break
        mean_loss = total / seen
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(epoch, mean_loss)
        history.append((epoch, mean_loss))
        log.debug("epoch %d loss %.6f", epoch, mean_loss)
        if hp.max_iterations and iteration >= hp.max_iterations:
            break
    model.history = history
    return model


def predict_lstm(model: LstmModel, inputs) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if model.standardizer is not None:
        xs = model.standardizer.transform(xs)
    probs, _ = lstm_forward(model, xs)
    return probs
