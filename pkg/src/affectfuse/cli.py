"""Command-line entry point: extract, train, score, fuse, eval, synth.

Exit codes: 0 success, 1 data/runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config, parse_overrides
from .fusion import FusionError, fuse, grid_search, write_lattice_log, write_result_json
from .ingest import (
    SPLITS,
    AudioError,
    EmotionLabel,
    ManifestError,
    ScoreFileError,
    parse_manifest,
    parse_scores,
    read_predictions,
    write_predictions,
    write_scores,
)
from .metrics import CoverageError, confusion, metrics, write_confusion_csv, write_metrics_json
from .models.container import ModelFileError
from .models.pipeline import (
    REPRESENTATIONS,
    featurize_entries,
    load_classifier,
    save_classifier,
    score_clips,
    train_classifier,
)
from .seqmap import maps_from_sequence, write_map_binary
from .stfeat import write_features_csv, write_matrix_binary

log = logging.getLogger("affectfuse")


class CommandError(RuntimeError):
    """Data or runtime failure that maps to exit code 1."""


def _config(args) -> PipelineConfig:
    overrides = parse_overrides(args.set or [])
    for name in ("seed", "jobs", "grid"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    return load_config(args.config, overrides)


def _manifest_split(args, default: str):
    manifest = parse_manifest(args.manifest)
    split = args.split or default
    return manifest, manifest.split(split)


def cmd_extract(args) -> int:
    cfg = _config(args)
    manifest = parse_manifest(args.manifest)
    entries = manifest.split(args.split) if args.split else manifest.entries
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    feats, errors = featurize_entries(manifest, entries, cfg, cfg.jobs)
    rows = []
    for e in entries:
        if e.clip_id not in feats:
            continue
        seq = feats[e.clip_id]
        csv_name, bin_name = f"{e.clip_id}.csv", f"{e.clip_id}.aff"
        write_features_csv(out / csv_name, e.clip_id, seq.vectors)
        write_matrix_binary(out / bin_name, seq.vectors)
        map_name = ""
        if args.maps:
            map_name = f"{e.clip_id}.afm"
            write_map_binary(out / map_name, maps_from_sequence(seq, cfg.tile_side, cfg.tile_stride, cfg.min_tiles))
        label = e.label.name if e.label is not None else ""
        rows.append([e.clip_id, e.split, label, len(seq), csv_name, bin_name, map_name])
    with open(out / "index.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip_id", "split", "label", "frames", "csv", "binary", "maps"])
        w.writerows(rows)
    log.info("extracted %d of %d clips into %s", len(rows), len(entries), out)
    if errors:
        raise CommandError(f"{len(errors)} clip(s) failed: " + "; ".join(f"{k}: {v}" for k, v in errors.items()))
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    manifest, entries = _manifest_split(args, "train")
    if not entries:
        raise CommandError("training split is empty")
    feats, errors = featurize_entries(manifest, entries, cfg, cfg.jobs)
    if errors:
        raise CommandError("feature extraction failed for " + ", ".join(sorted(errors)))
    data = [(feats[e.clip_id], e.label) for e in entries]
    try:
        clf = train_classifier(args.rep, data, cfg)
    except (ValueError, RuntimeError) as exc:
        raise CommandError(f"training {args.rep} failed: {exc}") from exc
    out = Path(args.out)
    save_classifier(out, clf)
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log.csv")
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        w.writerows([e, repr(float(l))] for e, l in clf.history)
    log.info("trained %s on %d clips -> %s", args.rep, len(data), out)
    return 0


def cmd_score(args) -> int:
    clf = load_classifier(args.model)
    cfg = clf.config
    jobs = args.jobs or cfg.jobs
    manifest, entries = _manifest_split(args, "validation")
    feats, errors = featurize_entries(manifest, entries, cfg, jobs)
    if errors:
        raise CommandError("feature extraction failed for " + ", ".join(sorted(errors)))
    model_id = args.model_id or Path(args.model).stem
    scores = score_clips(clf, feats, model_id)
    write_scores(args.out, scores, order=[e.clip_id for e in entries])
    log.info("scored %d clips with %s", len(entries), model_id)
    return 0


def _labels(args, default_split: str) -> dict[str, EmotionLabel]:
    if args.truth:
        return read_predictions(args.truth)
    manifest = parse_manifest(args.manifest)
    return manifest.labels(args.split or default_split)


def cmd_fuse(args) -> int:
    sets = [parse_scores(p) for p in args.scores]
    all_ids = set().union(*(s.scores for s in sets))
    gaps = {s.model_id: sorted(all_ids - set(s.scores)) for s in sets}
    gaps = {k: v for k, v in gaps.items() if v}
    if gaps:
        raise CommandError("clip coverage mismatch: " + "; ".join(f"{m} missing {', '.join(v)}" for m, v in gaps.items()))
    labels = _labels(args, "validation")
    unknown = sorted(set(labels) - all_ids)
    if unknown:
        raise CommandError("labelled clips without scores: " + ", ".join(unknown))
    grid = args.grid if args.grid is not None else _config(args).grid
    result = grid_search(sets, labels, grid, keep_log=bool(args.log))
    write_result_json(args.out, result)
    if args.log:
        write_lattice_log(args.log, result)
    if args.preds_out:
        write_predictions(args.preds_out, fuse(sets, result.best_weights, sorted(all_ids)))
    print(json.dumps(result.to_dict(), sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    preds = read_predictions(args.preds)
    if not preds:
        raise CommandError(f"{args.preds}: no predictions")
    truth = _labels(args, "validation")
    cm = confusion(preds, truth)
    summary = metrics(cm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_json(out / "metrics.json", summary)
    write_confusion_csv(out / "confusion_counts.csv", cm)
    write_confusion_csv(out / "confusion_percent.csv", cm, as_percent=True)
    print(json.dumps(summary.to_dict(), sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    from .synth import make_corpus

    per_class = {"train": args.train, "validation": args.validation, "test": args.test}
    manifest = make_corpus(args.out, per_class, seed=args.seed or 0, rate=args.rate)
    log.info("wrote %d clips to %s", len(manifest.entries), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker processes for per-clip work")

    p = argparse.ArgumentParser(prog="affectfuse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("extract", parents=[common], help="write per-clip feature files")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--split", choices=SPLITS)
    s.add_argument("--maps", action="store_true", help="also write AFM1 tile maps")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train", parents=[common], help="train one classifier")
    s.add_argument("--manifest", required=True)
    s.add_argument("--rep", required=True, choices=REPRESENTATIONS)
    s.add_argument("--out", required=True, help="model file (AFMD1)")
    s.add_argument("--split", choices=SPLITS, help="split to train on (default train)")
    s.add_argument("--log", help="training log CSV (default <out>.log.csv)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("score", parents=[common], help="emit class scores for a split")
    s.add_argument("--model", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--split", choices=SPLITS, help="default validation")
    s.add_argument("--out", required=True, help="score CSV")
    s.add_argument("--model-id")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("fuse", parents=[common], help="grid-search fusion weights")
    s.add_argument("scores", nargs="+", help="score CSVs; model id = file stem")
    truth = s.add_mutually_exclusive_group(required=True)
    truth.add_argument("--manifest")
    truth.add_argument("--truth", help="clip_id,label CSV")
    s.add_argument("--split", choices=SPLITS, help="labelled split (default validation)")
    s.add_argument("--grid", type=int)
    s.add_argument("--out", required=True, help="result JSON")
    s.add_argument("--log", help="per-lattice-point CSV")
    s.add_argument("--preds-out", help="fused predictions CSV for every scored clip")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("eval", parents=[common], help="confusion matrix and accuracies")
    s.add_argument("--preds", required=True, help="clip_id,label CSV")
    truth = s.add_mutually_exclusive_group(required=True)
    truth.add_argument("--manifest")
    truth.add_argument("--truth", help="clip_id,label CSV")
    s.add_argument("--split", choices=SPLITS, help="default validation")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic labelled corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--train", type=int, default=6, help="clips per class")
    s.add_argument("--validation", type=int, default=3)
    s.add_argument("--test", type=int, default=2)
    s.add_argument("--rate", type=int, default=16000)
    s.set_defaults(func=cmd_synth)
    return p


def _setup_logging() -> None:
    level = os.environ.get("AFFECTFUSE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.jobs is not None and args.jobs < 1:
            parser.error("--jobs must be >= 1")
        try:
            return args.func(args)
        except ConfigError as exc:
            parser.error(str(exc))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (
        CommandError,
        AudioError,
        ManifestError,
        ScoreFileError,
        FusionError,
        CoverageError,
        ModelFileError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
