"""Command-line interface.

Subcommands mirror the workflow: ``ingest`` builds the unified corpus,
``train`` fits all streams plus fusion and writes a model bundle,
``evaluate`` and ``ablate`` score a bundle against a corpus, and ``predict``
scores raw messages. Exit codes: 0 success, 2 config error, 3 data error,
4 training failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bundle import load_bundle, save_bundle
from .config import RunConfig, config_to_dict, load_config
from .corpus import (
    DatasetSchema,
    KeywordLexicon,
    corpus_stats,
    dedupe,
    ingest_dataset,
    normalize,
    read_corpus_jsonl,
    relabel_spam,
    split,
    write_corpus_jsonl,
)
from .errors import ConfigError, DataError, EncoderUnavailableError, TrainingError
from .evaluation import evaluate, render_ablation, render_table, run_ablation
from .pipeline import train_pipeline
from .tagging import tag_phrases, tag_semantic, tag_structural

FORMAT_CHOICES = ("json", "table")


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _require_corpus(args) -> list:
    if not args.corpus:
        raise ConfigError("--corpus is required for this command")
    return read_corpus_jsonl(args.corpus)


def cmd_ingest(args) -> int:
    config = _load_run_config(args)
    if not config.datasets:
        raise ConfigError("config has no datasets to ingest")
    if not args.out:
        raise ConfigError("--out is required: path for the merged corpus JSONL")

    messages = []
    per_source = {}
    rejected = {}
    for ds in config.datasets:
        schema = DatasetSchema(
            format=ds.format,
            text_column=ds.text_column,
            label_column=ds.label_column,
            delimiter=ds.delimiter,
            has_header=ds.has_header,
            encoding=ds.encoding,
        )
        result = ingest_dataset(ds.path, schema, ds.source_id)
        normalized = [normalize(r, ds.label_map) for r in result.records]
        messages.extend(normalized)
        per_source[ds.source_id] = len(normalized)
        rejected[ds.source_id] = result.rejected_rows

    before = corpus_stats(messages)
    relabel_cfg = config.data.relabel
    if relabel_cfg.enabled:
        lexicon = (
            KeywordLexicon.from_file(relabel_cfg.keywords_path, relabel_cfg.match_mode.upper())
            if relabel_cfg.keywords_path
            else KeywordLexicon.default()
        )
        messages = relabel_spam(messages, lexicon)
    messages = dedupe(messages)
    after = corpus_stats(messages)
    n_written = write_corpus_jsonl(messages, args.out)

    report = {
        "corpus_path": str(args.out),
        "messages_written": n_written,
        "rejected_rows": rejected,
        "per_source": per_source,
        "smishing_before_relabel": before.by_ternary.get("SMISHING", 0),
        "smishing_after_relabel": after.by_ternary.get("SMISHING", 0),
        "by_ternary": after.by_ternary,
        "positive_rate": after.positive_rate,
    }
    if args.format == "json":
        _emit(json.dumps(report, indent=2), None)
    else:
        lines = [f"wrote {n_written} messages to {args.out}"]
        for sid in per_source:
            lines.append(
                f"  {sid}: {per_source[sid]} ingested, {rejected[sid]} rejected rows"
            )
        lines.append(
            "  smishing: "
            f"{report['smishing_before_relabel']} before relabel, "
            f"{report['smishing_after_relabel']} after"
        )
        lines.append(f"  ternary counts: {after.by_ternary}")
        _emit("\n".join(lines), None)
    return 0


def cmd_train(args) -> int:
    config = _load_run_config(args)
    messages = _require_corpus(args)
    if not args.out:
        raise ConfigError("--out is required: directory for the model bundle")

    parts = split(messages, config.data.train_fraction, config.seed, config.data.stratify)
    pipeline = train_pipeline(parts.train, config)

    out_dir = Path(args.out)
    bundle_path = save_bundle(pipeline, out_dir / "bundle")
    history = {
        "char": pipeline.char_model.history,
        "contextual_head": pipeline.head_model.history,
        "fusion": pipeline.fusion_model.history,
    }
    (out_dir / "training_history.json").write_text(
        json.dumps(history, indent=2) + "\n", encoding="utf-8"
    )
    (out_dir / "config.json").write_text(
        json.dumps(config_to_dict(config), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    summary = {
        "bundle": str(bundle_path),
        "n_train": len(parts.train),
        "n_test": len(parts.test),
        "final_losses": {name: h[-1] for name, h in history.items()},
    }
    if args.format == "json":
        _emit(json.dumps(summary, indent=2), None)
    else:
        _emit(
            f"trained on {summary['n_train']} messages "
            f"({summary['n_test']} held out); bundle at {bundle_path}",
            None,
        )
    return 0


def cmd_evaluate(args) -> int:
    if not args.bundle:
        raise ConfigError("--bundle is required for evaluate")
    pipeline = load_bundle(args.bundle)
    messages = _require_corpus(args)
    config = pipeline.config
    seed = args.seed if args.seed is not None else config.seed
    parts = split(messages, config.data.train_fraction, seed, config.data.stratify)
    report = evaluate(pipeline, parts.test)
    if args.format == "json":
        _emit(json.dumps(report.as_dict(), indent=2), args.out)
    else:
        _emit(render_table(report), args.out)
    return 0


def cmd_ablate(args) -> int:
    if not args.bundle:
        raise ConfigError("--bundle is required for ablate")
    pipeline = load_bundle(args.bundle)
    messages = _require_corpus(args)
    config = pipeline.config
    seed = args.seed if args.seed is not None else config.seed
    parts = split(messages, config.data.train_fraction, seed, config.data.stratify)
    report = run_ablation(pipeline, parts.train, parts.test, mode=args.mode)
    if args.format == "json":
        _emit(json.dumps(report.as_dict(), indent=2), args.out)
    else:
        _emit(render_ablation(report), args.out)
    return 0


def _tag_summary(pipeline, text: str) -> dict:
    structural = tag_structural(text)
    semantic = tag_semantic(text, pipeline.gazetteer)
    phrases = tag_phrases(text, pipeline.lexicon)
    return {
        "structural": [{"tag": s.tag, "surface": s.surface} for s in structural.spans],
        "semantic": [{"tag": s.tag, "surface": s.surface} for s in semantic.spans],
        "countries": list(semantic.appended_countries),
        "phrases": [{"tag": s.tag, "surface": s.surface} for s in phrases.spans],
    }


def cmd_predict(args) -> int:
    if not args.bundle:
        raise ConfigError("--bundle is required for predict")
    pipeline = load_bundle(args.bundle)

    if args.text is not None:
        texts = [args.text]
    else:
        texts = []
        for line_no, line in enumerate(sys.stdin, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"stdin line {line_no} is not valid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "text" not in obj:
                raise DataError(f"stdin line {line_no} must be an object with a 'text' field")
            texts.append(str(obj["text"]))
        if not texts:
            raise DataError("no input messages: pass TEXT or JSONL lines on stdin")

    outputs = []
    for text in texts:
        result = pipeline.predict_message(text)
        record = result.as_dict()
        record["tags"] = _tag_summary(pipeline, text)
        outputs.append(record)

    if args.format == "table":
        lines = []
        for text, record in zip(texts, outputs):
            shown = text if len(text) <= 48 else text[:45] + "..."
            lines.append(
                f"{record['probability']:.4f}  {record['prediction']:<13} {shown}"
            )
        _emit("\n".join(lines), args.out)
    else:
        _emit("\n".join(json.dumps(r) for r in outputs), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smishfuse",
        description="Multi-stream SMS phishing detector: train, evaluate, predict.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--corpus", help="corpus JSONL path")
        p.add_argument("--bundle", help="model bundle directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output path")
        p.add_argument(
            "--format", choices=FORMAT_CHOICES, default="table", help="report format"
        )

    p_ingest = sub.add_parser("ingest", help="merge raw datasets into a corpus JSONL")
    add_common(p_ingest)
    p_ingest.set_defaults(func=cmd_ingest)

    p_train = sub.add_parser("train", help="train all streams and write a bundle")
    add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a bundle on the held-out partition")
    add_common(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_ablate = sub.add_parser("ablate", help="re-measure accuracy with streams removed")
    add_common(p_ablate)
    p_ablate.add_argument(
        "--mode", choices=("retrain", "zero"), default="retrain", help="ablation mode"
    )
    p_ablate.set_defaults(func=cmd_ablate)

    p_predict = sub.add_parser("predict", help="score messages (argument or JSONL stdin)")
    add_common(p_predict)
    p_predict.add_argument("text", nargs="?", default=None, help="single message text")
    p_predict.set_defaults(func=cmd_predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EncoderUnavailableError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
