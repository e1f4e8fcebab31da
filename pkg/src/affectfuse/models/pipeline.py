"""Representations, classifier training/inference and score emission per clip."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..config import PipelineConfig
from ..ingest import DatasetManifest, EmotionLabel, ExternalScoreSet, ManifestEntry, load_clip
from ..seqmap import MapSequence, maps_from_sequence, pad_min_length, summarize_holistic
from ..stfeat import FeatureSequence, featurize_clip
from .common import Standardizer, normalize_scores
from .container import ModelFileError, read_container, write_container
from .lstm import LstmHyperParams, LstmModel, init_lstm, lstm_train, predict_lstm
from .svm import LinearSvmModel, SvmHyperParams, predict_svm, train_svm

log = logging.getLogger(__name__)

REPRESENTATIONS = ("holistic-svm", "seq-lstm", "map-lstm")


def flatten_tiles(seq: MapSequence) -> np.ndarray:
    """(T, rows*cols) matrix, each tile flattened row-major."""
    t = seq.tiles.shape[0]
    return seq.tiles.reshape(t, -1).copy()


def represent(seq: FeatureSequence, representation: str, cfg: PipelineConfig) -> np.ndarray:
    if representation == "holistic-svm":
        return summarize_holistic(seq, cfg.functionals).values
    if representation == "seq-lstm":
        return pad_min_length(seq, cfg.min_seq_len).vectors
    if representation == "map-lstm":
        maps = maps_from_sequence(seq, cfg.tile_side, cfg.tile_stride, cfg.min_tiles)
        return flatten_tiles(maps)
    raise ValueError(f"unknown representation {representation!r}; choose from {', '.join(REPRESENTATIONS)}")


@dataclass
class Classifier:
    representation: str
    config: PipelineConfig
    model: LinearSvmModel | LstmModel

    def predict(self, seq: FeatureSequence) -> np.ndarray:
        x = represent(seq, self.representation, self.config)
        if isinstance(self.model, LinearSvmModel):
            scores = predict_svm(self.model, x)
        else:
            scores = predict_lstm(self.model, x)
        return normalize_scores(scores)

    @property
    def history(self) -> list[tuple[int, float]]:
        return self.model.history


def lstm_hyperparams(representation: str, cfg: PipelineConfig) -> LstmHyperParams:
    if representation == "seq-lstm":
        return LstmHyperParams(
            learning_rate=cfg.seq_lr, epochs=cfg.seq_epochs, clip_norm=cfg.seq_clip,
            batch_size=cfg.seq_batch, weight_decay=cfg.seq_weight_decay, seed=cfg.seed,
        )
    return LstmHyperParams(
        learning_rate=cfg.map_lr, epochs=cfg.map_epochs, clip_norm=cfg.map_clip,
        batch_size=cfg.map_batch, weight_decay=cfg.map_weight_decay, lr_step=cfg.map_lr_step,
        lr_decay=cfg.map_lr_decay, max_iterations=cfg.map_max_iterations, seed=cfg.seed,
    )


def train_classifier(
    representation: str, train: Sequence[tuple[FeatureSequence, EmotionLabel]], cfg: PipelineConfig
) -> Classifier:
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    if not train:
        raise ValueError("training split is empty")
    data = [(represent(seq, representation, cfg), lab) for seq, lab in train]
    if representation == "holistic-svm":
        model = train_svm(data, SvmHyperParams(lam=cfg.svm_lambda, epochs=cfg.svm_epochs, seed=cfg.seed))
    else:
        hidden = cfg.seq_hidden if representation == "seq-lstm" else cfg.map_hidden
        init = init_lstm(data[0][0].shape[1], hidden, seed=cfg.seed, scale=cfg.lstm_init_scale)
        model = lstm_train(init, data, lstm_hyperparams(representation, cfg))
    return Classifier(representation, cfg, model)


# ---------------------------------------------------------------------------
# feature extraction over manifests


def _featurize_one(path: str, clip_id: str, cfg: PipelineConfig) -> FeatureSequence:
    clip = load_clip(path, clip_id, cfg.sample_rate)
    return featurize_clip(clip, cfg.window_ms, cfg.step_ms)


def _featurize_safe(args):
    path, clip_id, cfg = args
    try:
        return _featurize_one(path, clip_id, cfg), None
    except Exception as exc:  # reported per clip by the caller
        return None, f"{type(exc).__name__}: {exc}"


def featurize_entries(
    manifest: DatasetManifest, entries: Sequence[ManifestEntry], cfg: PipelineConfig, jobs: int = 1
) -> tuple[dict[str, FeatureSequence], dict[str, str]]:
    """Features per clip plus a clip_id -> error message map; manifest order kept."""
    work = [(str(manifest.resolve(e)), e.clip_id, cfg) for e in entries]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_featurize_safe, work))
    else:
        results = [_featurize_safe(w) for w in work]
    feats, errors = {}, {}
    for e, (seq, err) in zip(entries, results):
        if err is None:
            feats[e.clip_id] = seq
        else:
            errors[e.clip_id] = err
            log.error("clip %s: %s", e.clip_id, err)
    return feats, errors


def score_clips(
    classifier: Classifier, features: dict[str, FeatureSequence], model_id: str
) -> ExternalScoreSet:
    return ExternalScoreSet(model_id, {cid: classifier.predict(seq) for cid, seq in features.items()})


# ---------------------------------------------------------------------------
# persistence


def save_classifier(path: str | Path, clf: Classifier) -> None:
    m = clf.model
    meta = {
        "representation": clf.representation,
        "config": clf.config.to_dict(),
        "history": [[e, l] for e, l in m.history],
    }
    if isinstance(m, LinearSvmModel):
        meta["kind"] = "linear-svm"
        meta["hyperparams"] = asdict(m.hyperparams)
        tensors = {"weights": m.weights, "biases": m.biases, "std_mean": m.standardizer.mean, "std_scale": m.standardizer.std}
    else:
        meta["kind"] = "lstm"
        meta["hyperparams"] = asdict(m.hyperparams)
        meta["input_dim"], meta["hidden_dim"] = m.input_dim, m.hidden_dim
        tensors = dict(m.params)
        std = m.standardizer or Standardizer.identity(m.input_dim)
        tensors["std_mean"], tensors["std_scale"] = std.mean, std.std
    write_container(path, meta, tensors)


def load_classifier(path: str | Path) -> Classifier:
    meta, t = read_container(path)
    cfg = PipelineConfig.from_dict(meta["config"])
    history = [tuple(x) for x in meta.get("history", [])]
    std = Standardizer(t["std_mean"], t["std_scale"])
    if meta.get("kind") == "linear-svm":
        model = LinearSvmModel(t["weights"], t["biases"], std, SvmHyperParams(**meta["hyperparams"]), history)
    elif meta.get("kind") == "lstm":
        params = {k: t[k] for k in ("Wx", "Wh", "b", "Wy", "by")}
        model = LstmModel(meta["input_dim"], meta["hidden_dim"], params, std, LstmHyperParams(**meta["hyperparams"]), history)
    else:
        raise ModelFileError(f"{path}: unknown model kind {meta.get('kind')!r}")
    return Classifier(meta["representation"], cfg, model)
