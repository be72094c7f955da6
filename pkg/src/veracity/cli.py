"""Command-line interface: ``veracity <command> ...``.

Exit status is 0 on success, 1 for usage errors, 2 for unreadable or
inconsistent data and 3 when training diverges.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import fields
from datetime import datetime, timezone
from pathlib import Path


from . import __version__
from .checkpoint import (load_checkpoint, load_featurizer, load_features, save_checkpoint, save_featurizer,
                         save_features)
from .estimator import VeracityClassifier
from .exceptions import NumericError, VeracityError
from .features import MessageFeaturizer
from .metrics import compute_metrics
from .model import CHANNELS, ModelConfig
from .pipeline import load_corpus, parse_message, split_by_event
from .sentiment import SentimentLexicon
from .visual import VISUAL_DIM, stub_extract, write_visual_features

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("veracity")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# ModelConfig fields a user may set for training; the rest come from the data
TRAIN_FIELDS = ("window_sizes", "d", "lstm1", "lstm2", "sent_fc", "vis_fc", "head_hidden", "batch", "lr",
                "max_epochs", "patience", "val_frac", "channels", "head_bias", "finetune_embeddings",
                "class_weight", "dtype")
PREPARE_FIELDS = ("steps", "seg_len", "min_freq", "train_frac", "visual_dim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _channel_list(text: str) -> tuple:
    chosen = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [c for c in chosen if c not in CHANNELS]
    if bad or not chosen:
        raise argparse.ArgumentTypeError(f"channels must be drawn from {','.join(CHANNELS)}, got {text!r}")
    return chosen


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"--config: file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"--config: {path}: {exc}") from None
    return {key.replace("-", "_"): value for key, value in data.items()}


def _resolve(args, names, config: dict, defaults: dict) -> dict:
    """Defaults, overridden by the config file, overridden by flags."""
    out = {}
    for name in names:
        value = getattr(args, name, None)
        if value is None:
            value = config.get(name, defaults[name])
        out[name] = value
    return out


def _require_file(path, flag: str) -> Path:
    if path is None:
        raise UsageError(f"{flag} is required")
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"{flag}: file not found: {path}")
    return path


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


# -- prepare -------------------------------------------------------------------


def cmd_prepare(args) -> int:
    config = _read_config(args.config)
    corpus_path = _require_file(args.corpus, "--corpus")
    emb_path = _require_file(args.embeddings, "--embeddings")
    lex_path = _require_file(args.lexicon, "--lexicon")
    visual_path = _require_file(args.visual, "--visual") if args.visual else None
    if args.out is None:
        raise UsageError("--out is required")
    opts = _resolve(args, PREPARE_FIELDS, config,
                    {"steps": 4, "seg_len": 32, "min_freq": 2, "train_frac": 0.7, "visual_dim": VISUAL_DIM})
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))

    corpus = load_corpus(corpus_path)
    if not corpus:
        raise UsageError(f"--corpus: {corpus_path} contains no messages")
    lexicon = SentimentLexicon.load(lex_path)
    train, test = split_by_event(corpus, train_frac=opts["train_frac"], seed=seed)
    featurizer = MessageFeaturizer(embeddings=str(emb_path), lexicon=lexicon,
                                   visual=str(visual_path) if visual_path else None, steps=opts["steps"],
                                   seg_len=opts["seg_len"], min_freq=opts["min_freq"], visual_dim=opts["visual_dim"])
    featurizer.fit(train)
    train_features = featurizer.transform(train)
    test_features = featurizer.transform(test)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_featurizer(out / "featurizer.zip", featurizer)
    save_features(out / "train.zip", train_features)
    save_features(out / "test.zip", test_features)
    summary = {
        "tool_version": __version__,
        "seed": seed,
        "options": opts,
        "inputs": {role: {"path": str(p), "sha256": sha256_file(p)}
                   for role, p in (("corpus", corpus_path), ("embeddings", emb_path), ("lexicon", lex_path),
                                   ("visual", visual_path)) if p is not None},
        "messages": len(corpus),
        "train": {"messages": len(train), "events": len({m.event_id for m in train})},
        "test": {"messages": len(test), "events": len({m.event_id for m in test})},
        "vocab_size": len(featurizer.vocabulary_),
        "embedding_coverage": featurizer.coverage_,
        "missing_images": train_features.missing_visual + test_features.missing_visual,
        "outputs": {name: sha256_file(out / name) for name in ("featurizer.zip", "train.zip", "test.zip")},
    }
    text = json.dumps(summary, indent=1, sort_keys=True)
    (out / "summary.json").write_text(text + "\n", encoding="utf-8")
    log.info("prepared %d messages (%d train / %d test), embedding coverage %.1f%%, %d missing images",
             len(corpus), len(train), len(test), 100 * featurizer.coverage_, summary["missing_images"])
    print(text)
    return EXIT_OK


# -- train ---------------------------------------------------------------------


def _prepared(data_dir, flag="--data"):
    data = Path(data_dir) if data_dir else None
    if data is None:
        raise UsageError(f"{flag} is required")
    for name in ("featurizer.zip", "train.zip"):
        if not (data / name).is_file():
            raise UsageError(f"{flag}: {data} is not a prepared directory (missing {name})")
    return data


def cmd_train(args) -> int:
    config = _read_config(args.config)
    data = _prepared(args.data)
    defaults = {f.name: f.default for f in fields(ModelConfig)}
    params = _resolve(args, TRAIN_FIELDS, config, defaults)
    seed = args.seed if args.seed is not None else int(config.get("seed", defaults["seed"]))
    unknown = set(config) - set(TRAIN_FIELDS) - set(PREPARE_FIELDS) - {"seed"}
    if unknown:
        raise UsageError(f"--config: unknown field(s) {', '.join(sorted(unknown))}")
    try:
        ModelConfig(**params, seed=seed).validate()
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None

    featurizer = load_featurizer(data / "featurizer.zip")
    train = load_features(data / "train.zip", featurizer.embedding_table_)

    started = datetime.now(timezone.utc)
    run_dir = Path(args.out or "runs") / f"{started.strftime('%Y%m%dT%H%M%S')}-seed{seed}"
    suffix = 1
    while run_dir.exists():
        suffix += 1
        run_dir = run_dir.with_name(f"{started.strftime('%Y%m%dT%H%M%S')}-seed{seed}-{suffix}")
    run_dir.mkdir(parents=True)
    inputs = {name: {"path": str(data / name), "sha256": sha256_file(data / name)}
              for name in ("featurizer.zip", "train.zip")}
    if args.config:
        inputs["config"] = {"path": str(args.config), "sha256": sha256_file(args.config)}
    manifest = {
        "command": "train",
        "tool_version": __version__,
        "seed": seed,
        "config": dict(params, seed=seed, window_sizes=list(params["window_sizes"]),
                       channels=list(params["channels"])),
        "inputs": inputs,
        "started": started.isoformat(),
    }
    manifest_path = run_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    log_path = run_dir / "train_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as log_fh:
        def on_epoch(record):
            log_fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
            log_fh.flush()
            log.info("epoch %d  train %.6f  val %.6f", record.epoch, record.train_loss, record.val_loss)

        clf = VeracityClassifier(**params, seed=seed, callback=on_epoch)
        clf.fit(train)
    ckpt = run_dir / "checkpoint.zip"
    save_checkpoint(ckpt, clf, featurizer)
    manifest["finished"] = datetime.now(timezone.utc).isoformat()
    manifest["outputs"] = {"checkpoint.zip": sha256_file(ckpt), "train_log.jsonl": sha256_file(log_path)}
    manifest["best_epoch"] = clf.best_epoch_
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    log.info("best epoch %d, checkpoint %s", clf.best_epoch_, ckpt)
    print(ckpt)
    return EXIT_OK


# -- evaluate / predict / export -----------------------------------------------


def _load_model(args):
    path = _require_file(args.checkpoint, "--checkpoint")
    visual = str(_require_file(args.visual, "--visual")) if getattr(args, "visual", None) else None
    ckpt = load_checkpoint(path, visual=visual)
    if ckpt.featurizer is None:
        raise UsageError(f"--checkpoint: {path} carries no featurizer state")
    return ckpt


def _features(args, ckpt, require_labels=True):
    """Featurise ``--data``: a prepared ``.zip`` or a JSON-lines corpus."""
    path = _require_file(args.data, "--data")
    if path.suffix == ".zip":
        return load_features(path, ckpt.featurizer.embedding_table_)
    messages = load_corpus(path, require_labels=require_labels)
    return ckpt.featurizer.transform(messages)


def cmd_evaluate(args) -> int:
    ckpt = _load_model(args)
    features = _features(args, ckpt)
    if len(features) == 0:
        raise UsageError(f"--data: {args.data} holds an empty test set")
    if features.labels is None:
        raise UsageError(f"--data: {args.data} has no labels to evaluate against")
    report = compute_metrics(ckpt.classifier.predict(features), features.labels)
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    if args.format == "table":
        print(report.table())
    else:
        print(report.to_json())
        sys.stderr.write(report.table() + "\n")
    return EXIT_OK


def cmd_predict(args) -> int:
    ckpt = _load_model(args)
    path = _require_file(args.data, "--data")
    rows = []
    failed = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            mid = None
            try:
                obj = json.loads(line)
                mid = obj.get("id") if isinstance(obj, dict) else None
                message = parse_message(obj, path, lineno, require_label=False)
                p = float(ckpt.classifier.predict_proba(ckpt.featurizer.transform([message]))[0, 1])
            except (json.JSONDecodeError, VeracityError, ValueError) as exc:
                failed += 1
                log.warning("%s:%d: %s", path, lineno, exc)
                rows.append({"id": mid, "line": lineno, "error": str(exc)})
                continue
            rows.append({"id": message.id, "p_fake": p, "label": int(p > 0.5)})
    _emit("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), args.out)
    if failed:
        log.warning("%d of %d messages could not be scored", failed, len(rows))
    return EXIT_OK


def cmd_export_embeddings(args) -> int:
    ckpt = _load_model(args)
    features = _features(args, ckpt, require_labels=False)
    if args.out is None:
        raise UsageError("--out is required")
    ckpt.classifier.export_embeddings(features, args.out)
    log.info("wrote %d representations to %s", len(features), args.out)
    print(args.out)
    return EXIT_OK


def cmd_extract_features(args) -> int:
    if not args.stub:
        raise UsageError("only the deterministic --stub extractor is available; pass --stub")
    images = Path(args.images) if args.images else None
    if images is None or not images.is_dir():
        raise UsageError(f"--images: not a directory: {args.images}")
    if args.out is None:
        raise UsageError("--out is required")
    features = {}
    for path in sorted(p for p in images.iterdir() if p.is_file()):
        if path.stem in features:
            log.warning("%s: duplicate image id %s, keeping the first file", path, path.stem)
            continue
        data = path.read_bytes()
        if not data:
            log.warning("%s: empty file skipped", path)
            continue
        features[path.stem] = stub_extract(data, args.visual_dim)
    write_visual_features(args.out, features)
    log.info("wrote %d feature vectors to %s", len(features), args.out)
    print(args.out)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _bool_flag(parser, name, help):
    dest = name.replace("-", "_")
    group = parser.add_mutually_exclusive_group()
    group.add_argument(f"--{name}", dest=dest, action="store_const", const=True, default=None, help=help)
    group.add_argument(f"--no-{name}", dest=dest, action="store_const", const=False)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    common.add_argument("--config", default=None, help="TOML file setting any option; flags take precedence")
    common.add_argument("--out", default=None, help="output path or directory")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")

    parser = _Parser(prog="veracity", description="Multi-channel fake news classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", parents=[common], help="featurise a corpus into train/test sets")
    p.add_argument("--corpus", help="JSON-lines messages")
    p.add_argument("--embeddings", help="word vectors, one 'token v1 ... vk' per line")
    p.add_argument("--lexicon", help="sentiment lexicon TSV")
    p.add_argument("--visual", help="image feature file (id<TAB>base64)")
    p.add_argument("--steps", type=int)
    p.add_argument("--seg-len", type=int)
    p.add_argument("--min-freq", type=int)
    p.add_argument("--train-frac", type=float)
    p.add_argument("--visual-dim", type=int)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[common], help="train a model on a prepared directory")
    p.add_argument("--data", help="directory written by 'prepare'")
    p.add_argument("--window-sizes", type=_int_list)
    for name in ("d", "lstm1", "lstm2", "sent-fc", "vis-fc", "head-hidden", "batch", "max-epochs", "patience"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--val-frac", type=float)
    p.add_argument("--channels", type=_channel_list)
    _bool_flag(p, "head-bias", "use biases in the classification head")
    _bool_flag(p, "finetune-embeddings", "update the word embedding table")
    p.add_argument("--class-weight", choices=["balanced"])
    p.add_argument("--dtype", choices=["float64", "float32"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a checkpoint on labelled data")
    p.add_argument("--checkpoint")
    p.add_argument("--data", help="prepared test.zip or a JSON-lines corpus")
    p.add_argument("--visual", help="image features for a JSON-lines corpus")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", parents=[common], help="write fake probabilities as JSON lines")
    p.add_argument("--checkpoint")
    p.add_argument("--data", help="JSON-lines corpus; labels optional")
    p.add_argument("--visual")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("extract-features", parents=[common], help="build an image feature file")
    p.add_argument("--images", help="directory of image files; the id is the file stem")
    p.add_argument("--stub", action="store_true", help="hash-seeded deterministic vectors")
    p.add_argument("--visual-dim", type=int, default=VISUAL_DIM)
    p.set_defaults(func=cmd_extract_features)

    p = sub.add_parser("export-embeddings", parents=[common], help="write joint text/sentiment vectors as CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--visual")
    p.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else
                        logging.WARNING, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"veracity {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"veracity {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (VeracityError, OSError, ValueError) as exc:
        print(f"veracity {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
