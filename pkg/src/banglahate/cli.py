"""Command-line entry point: normalize, inspect-data, train, evaluate, predict.

Exit codes: 0 success, 1 I/O failure, 2 configuration or validation failure,
3 numerical failure (non-finite loss).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset, evaluation, textnorm, training
from .checkpoint import CorruptCheckpoint, load_checkpoint
from .config import ConfigError, load_run_config
from .encoder import BackendUnavailable, make_backend
from .model import TextClassifier, build_head
from .textnorm import LexiconError

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file (defaults < file < flags)")
    parser.add_argument("--seed", type=int, help="global random seed")
    parser.add_argument("--subtask", choices=["1A", "1B"], help="label scheme to use")
    parser.add_argument("--encoder", choices=["pretrained", "stub"], help="embedding backend")
    parser.add_argument("--encoder-id", help="pretrained checkpoint name/path or stub seed")
    parser.add_argument("--weights-dir", help="local directory with pretrained weights")
    parser.add_argument("--freeze-encoder", action="store_true", help="do not fine-tune the encoder")


def _resolve(args: argparse.Namespace, extra: dict | None = None):
    overrides: dict[tuple[str, str], object] = {
        ("run", "seed"): args.seed,
        ("run", "subtask"): args.subtask,
        ("encoder", "kind"): args.encoder,
        ("encoder", "identifier"): args.encoder_id,
        ("encoder", "weights_dir"): args.weights_dir,
    }
    if args.freeze_encoder:
        overrides[("encoder", "trainable")] = False
    if extra:
        overrides.update(extra)
    return load_run_config(args.config, overrides)


def _build_backend(cfg, d_embed: int):
    return make_backend(
        kind=cfg.get("encoder", "kind"),
        identifier=cfg.get("encoder", "identifier"),
        weights_dir=cfg.get("encoder", "weights_dir") or None,
        trainable=cfg.get("encoder", "trainable"),
        d_embed=d_embed,
    )


def cmd_normalize(args: argparse.Namespace) -> int:
    lexicon = textnorm.load_emoji_lexicon(args.lexicon) if args.lexicon else None
    src = Path(args.input)
    if not src.exists():
        raise FileNotFoundError(f"input file not found: {src}")
    text = src.read_text(encoding="utf-8")
    lines = text.split("\n")
    trailing_newline = lines and lines[-1] == ""
    if trailing_newline:
        lines.pop()
    out_lines = [textnorm.normalize(line, lexicon) for line in lines]
    out = "\n".join(out_lines)
    if trailing_newline:
        out += "\n"
    Path(args.output).write_text(out, encoding="utf-8")
    print(f"normalized {len(out_lines)} lines -> {args.output}")
    return EXIT_OK


def cmd_inspect_data(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    scheme = dataset.scheme_for(cfg.subtask)
    data = dataset.load_dataset(args.data, scheme)
    dist = dataset.distribution(data, scheme)
    if args.format in ("text", "both"):
        print(dist.format_table())
    if args.format in ("json", "both"):
        print(dist.to_json())
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    extra: dict[tuple[str, str], object] = {
        ("training", "max_epochs"): args.max_epochs,
        ("training", "learning_rate"): args.learning_rate,
        ("training", "batch_size"): args.batch_size,
        ("training", "patience"): args.patience,
        ("run", "dev_fraction"): args.dev_fraction,
        ("run", "output_dir"): args.output_dir,
    }
    if args.use_class_weights:
        extra[("training", "use_class_weights")] = True
    cfg = _resolve(args, extra)
    scheme = dataset.scheme_for(cfg.subtask)

    data = dataset.load_dataset(args.train_file, scheme)
    normalized = [
        dataset.Example(ex.id, textnorm.normalize(ex.text), ex.label) for ex in data
    ]
    split_spec = dataset.SplitSpec(cfg.get("run", "dev_fraction"), cfg.seed)
    train_set, dev_set = dataset.stratified_split(normalized, split_spec, scheme)

    model_cfg = cfg.model_config(num_labels=scheme.num_classes)
    backend = _build_backend(cfg, model_cfg.d_embed)
    classifier = TextClassifier(backend, build_head(model_cfg), scheme)

    weights = None
    train_cfg = cfg.train_config()
    if train_cfg.use_class_weights:
        weights = dataset.class_weights(dataset.distribution(train_set, scheme))

    out_dir = Path(cfg.get("run", "output_dir"))
    out_dir.mkdir(parents=True, exist_ok=True)
    run_config = cfg.as_dict()
    run_config["model"]["num_labels"] = scheme.num_classes
    run_config["run"]["train_file"] = str(args.train_file)
    # location of the run directory is not part of the run's identity
    del run_config["run"]["output_dir"]

    result = training.fit(
        classifier, train_set, dev_set, train_cfg, out_dir,
        run_config=run_config, class_weights=weights,
    )

    (out_dir / "split.json").write_text(
        json.dumps(
            {"train_ids": [ex.id for ex in train_set], "dev_ids": [ex.id for ex in dev_set]},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    dataset.write_dataset(out_dir / "dev.tsv", dev_set, scheme)

    print(f"best dev micro-F1: {result.best_dev_f1:.4f} (epoch {result.best_epoch})")
    print(f"checkpoint: {result.checkpoint_path}")
    return EXIT_OK


def _load_classifier(args: argparse.Namespace, cfg):
    import torch

    torch.set_num_threads(1)  # keep scoring bit-reproducible across runs
    bundle = load_checkpoint(args.checkpoint)
    if args.subtask and args.subtask != bundle.scheme.subtask:
        raise ConfigError(
            f"scheme mismatch: checkpoint was trained for subtask {bundle.scheme.subtask}, "
            f"requested {args.subtask}"
        )
    enc = bundle.encoder_info
    kind = args.encoder or enc.get("kind", "stub")
    identifier = args.encoder_id or enc.get("identifier", "")
    if kind == "stub" and identifier.startswith("stub:"):
        identifier = identifier.split(":", 1)[1]
    backend = make_backend(
        kind=kind,
        identifier=identifier,
        weights_dir=(args.weights_dir or cfg.get("encoder", "weights_dir") or None),
        trainable=False,
        d_embed=bundle.head.cfg.d_embed,
    )
    return TextClassifier(backend, bundle.head, bundle.scheme), bundle


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    classifier, _ = _load_classifier(args, cfg)
    data = dataset.load_dataset(args.data, classifier.scheme)
    normalized = [
        dataset.Example(ex.id, textnorm.normalize(ex.text), ex.label) for ex in data
    ]
    pred = evaluation.predict(classifier, normalized)
    report = evaluation.score(pred, [ex.label for ex in normalized], classifier.scheme)
    print(report.to_text())
    if args.out_json:
        Path(args.out_json).write_text(report.to_json() + "\n", encoding="utf-8")
        print(f"report written to {args.out_json}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    classifier, _ = _load_classifier(args, cfg)
    rows = dataset.load_unlabeled(args.input)
    normalized = [
        dataset.UnlabeledExample(r.id, textnorm.normalize(r.text)) for r in rows
    ]
    pred = evaluation.predict(classifier, normalized)
    lines = [
        f"{row.id}\t{classifier.scheme.name_of(p)}" for row, p in zip(normalized, pred)
    ]
    Path(args.output).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    print(f"wrote {len(lines)} predictions -> {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="banglahate",
        description="Bangla hate-speech classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="normalize a line-oriented text file")
    p.add_argument("--input", required=True, help="input file, one document per line")
    p.add_argument("--output", required=True, help="output file (same line count)")
    p.add_argument("--lexicon", help="emoji lexicon TSV (default: shipped lexicon)")
    _add_common(p)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("inspect-data", help="audit the class distribution of a corpus")
    p.add_argument("--data", required=True, help="labeled TSV (id/text/label)")
    p.add_argument("--format", choices=["text", "json", "both"], default="both")
    _add_common(p)
    p.set_defaults(func=cmd_inspect_data)

    p = sub.add_parser("train", help="train a classifier")
    p.add_argument("--train-file", required=True, help="labeled TSV (id/text/label)")
    p.add_argument("--output-dir", help="run directory (manifest, checkpoint, split)")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--dev-fraction", type=float)
    p.add_argument("--use-class-weights", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a labeled corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="labeled TSV (id/text/label)")
    p.add_argument("--out-json", help="also write the report as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="write submission-shaped predictions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="TSV with id/text (label column ignored)")
    p.add_argument("--output", required=True, help="headerless TSV: id<TAB>predicted_label")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except training.NonFiniteLoss as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, LexiconError, dataset.DatasetError, CorruptCheckpoint,
            BackendUnavailable, ValueError) as exc:
        print(f"config/validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
