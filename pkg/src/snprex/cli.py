"""Command-line pipeline: ingest, stats, split, train, predict, evaluate,
gradcheck, report.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 runtime
failure. Errors are printed to stderr as one machine-parsable line
(``snprex-error: <kind>: <reason>``). Artifacts go under ``--out`` (default
from ``SNPREX_OUT``, else ``./snprex-out``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from .corpus import (
    Corpus,
    CorpusFormat,
    CorpusError,
    SplitMode,
    SplitSpec,
    corpus_stats,
    parse_corpus,
    serialize_corpus,
    split_dataset,
    validate_corpus,
)
from .encoders import EncoderKind, EncoderSpec, EncoderError, encoder_signature, embed
from .evaluation import Averaging, aggregate_to_abstract, evaluate, gold_labels
from .head import HeadConfig, HeadError, gradient_check, init_head_params
from .encoders import EmbeddingMatrix
from .preprocess import (
    Level,
    MarkerScheme,
    PreprocessConfig,
    PreprocessError,
    build_instances,
    corpus_vocab,
    load_stopwords,
)
from .train import (
    PredictionRecord,
    TrainConfig,
    TrainError,
    load_checkpoint,
    predict as run_predict,
    save_checkpoint,
    train as run_train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_FORMATS = {"native": CorpusFormat.SNPPHENA_NATIVE, "jsonl": CorpusFormat.CANONICAL_JSONL}
_ENCODERS = {
    "hashing": EncoderKind.HASHING,
    "static": EncoderKind.STATIC_LOOKUP,
    "contextual": EncoderKind.CONTEXTUAL_PRETRAINED,
}


def _log(msg: str):
    print(msg, file=sys.stderr)


def _fail(kind: str, reason: str, code: int) -> int:
    print(f"snprex-error: {kind}: {reason}", file=sys.stderr)
    return code


def _default_out() -> str:
    return os.environ.get("SNPREX_OUT", "snprex-out")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_corpus(args) -> Corpus:
    return parse_corpus(args.corpus, _FORMATS[args.format])


def _preprocess_config(args) -> PreprocessConfig:
    kwargs = dict(
        lowercase=args.lowercase,
        remove_stopwords=args.remove_stopwords,
        stem=args.stem,
        lemmatize=args.lemmatize,
        marker_scheme=MarkerScheme.NONE if args.no_markers else MarkerScheme.WRAP_MARKERS,
    )
    if args.stopwords:
        kwargs["stopword_list"] = load_stopwords(args.stopwords)
    return PreprocessConfig(**kwargs)


def _encoder_spec(args) -> EncoderSpec:
    return EncoderSpec(
        kind=_ENCODERS[args.encoder],
        d=args.embed_dim,
        model_id_or_path=args.model_path,
        vocab_size=getattr(args, "_vocab_size", 0),
        seed=args.seed,
        trainable=args.trainable_encoder,
    )


def _add_preprocess_flags(sub):
    sub.add_argument("--lowercase", action=argparse.BooleanOptionalAction, default=True)
    sub.add_argument("--remove-stopwords", dest="remove_stopwords",
                     action=argparse.BooleanOptionalAction, default=False)
    sub.add_argument("--stem", action=argparse.BooleanOptionalAction, default=False)
    sub.add_argument("--lemmatize", action=argparse.BooleanOptionalAction, default=False)
    sub.add_argument("--stopwords", default="", help="stopword list file, one token per line")
    sub.add_argument("--no-markers", action="store_true", help="disable entity marker insertion")


def _add_encoder_flags(sub):
    sub.add_argument("--encoder", choices=sorted(_ENCODERS), default="hashing")
    sub.add_argument("--embed-dim", dest="embed_dim", type=int, default=64)
    sub.add_argument("--model-path", dest="model_path", default="",
                     help="local path of the pretrained contextual encoder")
    sub.add_argument("--trainable-encoder", dest="trainable_encoder", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snprex",
        description="SNP-phenotype association candidate classification pipeline",
    )
    parser.add_argument("--config", default="", help="JSON file of default flag values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a corpus and write the canonical JSONL form")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=sorted(_FORMATS), default="jsonl")
    p.add_argument("--out", default=_default_out())

    p = sub.add_parser("stats", help="print corpus statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=sorted(_FORMATS), default="jsonl")

    p = sub.add_parser("split", help="split a corpus into train/test at document granularity")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=sorted(_FORMATS), default="jsonl")
    p.add_argument("--mode", choices=["official", "stratified"], default="official")
    p.add_argument("--test-fraction", dest="test_fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=_default_out())

    p = sub.add_parser("train", help="train the classifier head")
    p.add_argument("--corpus", required=True, help="training corpus (canonical JSONL)")
    p.add_argument("--format", choices=sorted(_FORMATS), default="jsonl")
    p.add_argument("--level", choices=["sentence", "abstract"], default="sentence")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=16)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=1e-4)
    p.add_argument("--adam-epsilon", dest="adam_epsilon", type=float, default=1e-7)
    p.add_argument("--max-len-sentence", dest="max_len_sentence", type=int, default=70)
    p.add_argument("--max-len-abstract", dest="max_len_abstract", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--conv-filters", dest="conv_filters", type=int, default=128)
    p.add_argument("--gru-hidden", dest="gru_hidden", type=int, default=128)
    p.add_argument("--dense-width", dest="dense_width", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--out", default=_default_out())
    _add_preprocess_flags(p)
    _add_encoder_flags(p)

    p = sub.add_parser("predict", help="classify candidates with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=sorted(_FORMATS), default="jsonl")
    p.add_argument("--out", default=_default_out())

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--predictions", required=True, help="JSONL prediction file")
    p.add_argument("--gold", required=True, help="gold corpus (canonical JSONL)")
    p.add_argument("--level", choices=["sentence", "abstract"], default="sentence")
    p.add_argument("--averaging", choices=[a.value for a in Averaging], default="MACRO")
    p.add_argument("--bootstrap", type=int, default=0, help="bootstrap resamples (0 = off)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=_default_out())

    p = sub.add_parser("gradcheck", help="finite-difference check of the head gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tiny", action="store_true", help="use tiny dimensions (default behavior)")
    p.add_argument("--eps", type=float, default=1e-5)

    p = sub.add_parser("report", help="print a saved metrics report as a CSV table line")
    p.add_argument("--metrics", required=True, help="metrics JSON file written by evaluate")

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # peek at --config before full parsing so the file can provide defaults
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default="")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        with open(known.config, "r", encoding="utf-8") as fh:
            defaults = json.load(fh)
        parser.set_defaults(**defaults)
        for action in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
            action.set_defaults(**{k: v for k, v in defaults.items()})
            # a value supplied by the config file satisfies required options
            for opt in action._actions:
                if opt.required and opt.dest in defaults:
                    opt.required = False
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# Subcommand implementations


def _cmd_ingest(args) -> int:
    corpus = _load_corpus(args)
    report = validate_corpus(corpus)
    out = _out_dir(args)
    (out / "corpus.jsonl").write_bytes(serialize_corpus(corpus))
    stats = corpus_stats(corpus)
    _log(f"ingested {stats.n_documents} documents, {stats.n_sentences} sentences, "
         f"{stats.n_candidates} candidates -> {out / 'corpus.jsonl'}")
    for doc_id, warning in report.warnings:
        _log(f"warning [{doc_id}]: {warning}")
    return EXIT_OK


def _cmd_stats(args) -> int:
    stats = corpus_stats(_load_corpus(args))
    print(f"({stats.n_documents}, {stats.n_sentences}, {stats.n_positive}, "
          f"{stats.n_negative}, {stats.n_neutral})")
    _log(f"documents={stats.n_documents} sentences={stats.n_sentences} "
         f"candidates={stats.n_candidates} positive={stats.n_positive} "
         f"negative={stats.n_negative} neutral={stats.n_neutral}")
    return EXIT_OK


def _cmd_split(args) -> int:
    corpus = _load_corpus(args)
    spec = SplitSpec(
        mode=SplitMode.OFFICIAL if args.mode == "official" else SplitMode.STRATIFIED,
        test_fraction=args.test_fraction,
        seed=args.seed,
    )
    train_c, test_c = split_dataset(corpus, spec)
    out = _out_dir(args)
    (out / "train.jsonl").write_bytes(serialize_corpus(train_c))
    (out / "test.jsonl").write_bytes(serialize_corpus(test_c))
    _log(f"train: {corpus_stats(train_c)}")
    _log(f"test:  {corpus_stats(test_c)}")
    return EXIT_OK


def _cmd_train(args) -> int:
    corpus = _load_corpus(args)
    level = Level.SENTENCE if args.level == "sentence" else Level.ABSTRACT
    pre_cfg = _preprocess_config(args)
    vocab = corpus_vocab(corpus, pre_cfg)
    args._vocab_size = len(vocab)
    enc_spec = _encoder_spec(args)
    train_cfg = TrainConfig(
        batch_size=args.batch_size, epochs=args.epochs,
        learning_rate=args.learning_rate, adam_epsilon=args.adam_epsilon,
        max_len_sentence=args.max_len_sentence, max_len_abstract=args.max_len_abstract,
        seed=args.seed, level=level,
    )
    head_cfg = HeadConfig(F=args.conv_filters, H=args.gru_hidden,
                          D1=args.dense_width, dropout_p=args.dropout)
    instances = build_instances(corpus, level, train_cfg.max_len, pre_cfg, vocab)
    if enc_spec.kind is EncoderKind.CONTEXTUAL_PRETRAINED and enc_spec.trainable:
        from .torch_head import finetune_contextual

        ckpt = finetune_contextual(instances, enc_spec, head_cfg, train_cfg)
    else:
        ckpt = run_train(instances, enc_spec, head_cfg, train_cfg)
    out = _out_dir(args)
    ckpt_dir = out / "checkpoint"
    save_checkpoint(ckpt, ckpt_dir)
    _write_run_sidecar(ckpt_dir, args, enc_spec, vocab)
    final = ckpt.history[-1]
    _log(f"trained {train_cfg.epochs} epochs; final mean loss {final.mean_loss:.6f}, "
         f"train accuracy {final.train_accuracy:.4f}; checkpoint -> {ckpt_dir}")
    return EXIT_OK


def _write_run_sidecar(ckpt_dir: Path, args, enc_spec: EncoderSpec, vocab: dict[str, int]):
    sidecar = {
        "encoder": {
            "kind": enc_spec.kind.value, "d": enc_spec.d,
            "model_id_or_path": enc_spec.model_id_or_path,
            "vocab_size": enc_spec.vocab_size, "seed": enc_spec.seed,
            "trainable": enc_spec.trainable,
        },
        "preprocess": {
            "lowercase": args.lowercase, "remove_stopwords": args.remove_stopwords,
            "stem": args.stem, "lemmatize": args.lemmatize,
            "stopwords": args.stopwords, "no_markers": args.no_markers,
        },
    }
    (ckpt_dir / "run.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    (ckpt_dir / "vocab.json").write_text(json.dumps(vocab, sort_keys=True) + "\n")


def _cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    ckpt_dir = Path(args.checkpoint)
    sidecar = json.loads((ckpt_dir / "run.json").read_text("utf-8"))
    vocab = json.loads((ckpt_dir / "vocab.json").read_text("utf-8"))
    enc = sidecar["encoder"]
    enc_spec = EncoderSpec(
        kind=EncoderKind(enc["kind"]), d=enc["d"],
        model_id_or_path=enc["model_id_or_path"], vocab_size=enc["vocab_size"],
        seed=enc["seed"], trainable=enc["trainable"],
    )
    pre = sidecar["preprocess"]
    pre_cfg = PreprocessConfig(
        lowercase=pre["lowercase"], remove_stopwords=pre["remove_stopwords"],
        stem=pre["stem"], lemmatize=pre["lemmatize"],
        marker_scheme=MarkerScheme.NONE if pre["no_markers"] else MarkerScheme.WRAP_MARKERS,
        **({"stopword_list": load_stopwords(pre["stopwords"])} if pre["stopwords"] else {}),
    )
    corpus = _load_corpus(args)
    instances = build_instances(corpus, ckpt.train_cfg.level, ckpt.train_cfg.max_len, pre_cfg, vocab)
    records = run_predict(ckpt, instances, enc_spec)
    out = _out_dir(args)
    path = out / "predictions.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "candidate_ref": rec.candidate_ref, "class_id": rec.class_id,
                "prob_0": rec.probs[0], "prob_1": rec.probs[1],
            }) + "\n")
    _log(f"wrote {len(records)} predictions -> {path}")
    return EXIT_OK


def _read_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(PredictionRecord(
                obj["candidate_ref"], int(obj["class_id"]),
                (float(obj["prob_0"]), float(obj["prob_1"])),
            ))
    return records


def _cmd_evaluate(args) -> int:
    preds = _read_predictions(args.predictions)
    gold_corpus = parse_corpus(args.gold, CorpusFormat.CANONICAL_JSONL)
    level = Level.SENTENCE if args.level == "sentence" else Level.ABSTRACT
    if level is Level.ABSTRACT:
        preds, golds = aggregate_to_abstract(preds, gold_corpus)
    else:
        golds = gold_labels(gold_corpus)
    report = evaluate(preds, golds, level, Averaging(args.averaging))
    extra = {}
    if args.bootstrap:
        lo, hi = eval_mod.bootstrap_ci(preds, golds, n_resamples=args.bootstrap, seed=args.seed)
        extra["f1_bootstrap_ci"] = [lo, hi]
    out = _out_dir(args)
    path = out / f"metrics_{args.level}.json"
    path.write_text(report.to_json(**extra) + "\n", encoding="utf-8")
    print(report.to_csv_line())
    _log(f"metrics report -> {path}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    cfg = HeadConfig(k=3, F=2, H=2, D1=3, dropout_p=0.0)
    params = init_head_params(cfg, d=4, seed=args.seed)
    L, tl = 6, 5
    values = np.zeros((L, 4))
    values[:tl] = rng.standard_normal((tl, 4))
    E = EmbeddingMatrix(values, tl)
    err = gradient_check(params, E, cfg, class_id=1, eps=args.eps, seed=args.seed)
    print(f"max relative error: {err:.3e}")
    if err > 1e-4:
        return _fail("gradcheck", f"max relative error {err:.3e} exceeds 1e-4", EXIT_RUNTIME)
    return EXIT_OK


def _cmd_report(args) -> int:
    obj = json.loads(Path(args.metrics).read_text("utf-8"))
    print("level,averaging,precision,recall,f1,n_instances")
    print(",".join([
        obj["level"], obj["averaging"],
        f"{obj['precision']:.6f}", f"{obj['recall']:.6f}", f"{obj['f1']:.6f}",
        str(obj["n_instances"]),
    ]))
    for mode, vals in sorted(obj.get("all_modes", {}).items()):
        _log(f"{mode}: precision={vals['precision']:.4f} recall={vals['recall']:.4f} "
             f"f1={vals['f1']:.4f}")
    return EXIT_OK


_COMMANDS = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "split": _cmd_split,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "gradcheck": _cmd_gradcheck,
    "report": _cmd_report,
}


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("config", str(exc), EXIT_USAGE)
    try:
        return _COMMANDS[args.command](args)
    except (CorpusError, PreprocessError, TrainError, eval_mod.EvalError,
            json.JSONDecodeError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_DATA)
    except FileNotFoundError as exc:
        return _fail("MissingPath", str(exc), EXIT_DATA)
    except (EncoderError, HeadError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_RUNTIME)


def main():  # console entry point
    sys.exit(run_command(sys.argv[1:]))
