"""``matra`` command line: stats, extract, train, score, baselines, evaluate.

Every option can also come from a flat ``key = value`` file given with
``--config``; keys are option names without the leading dashes, and flags on
the command line win. Exit status: 0 success, 1 computational failure, 2
usage or I/O error. Diagnostics go to stderr; data only to ``--out`` paths.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from matra import basemetrics, corpus, evalharness, features, lexstats, neural, text
from matra.resources import load_resources
from matra.vectors import MissingEmbeddingError

log = logging.getLogger("matra")


class UsageError(Exception):
    pass


def read_config(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _add_resource_flags(p):
    p.add_argument("--corpus", help="segments file (.jsonl or .tsv)")
    p.add_argument("--stats", help="n-gram statistics / LM artifact from 'matra stats'")
    p.add_argument("--word-vectors", help="plain-text word vectors ('count dim' header)")
    p.add_argument("--embeddings", help="sentence-embedding sidecar JSONL")
    p.add_argument("--no-embedding-fallback", action="store_true", default=None,
                   help="fail on missing sentence embeddings instead of using mean word vectors")
    p.add_argument("--stopwords-src")
    p.add_argument("--stopwords-tgt")
    p.add_argument("--stem-rules")
    p.add_argument("--pos-lexicon")
    p.add_argument("--quartile-side", choices=["candidate", "source"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matra", description="Feature extraction, training, scoring and meta-evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="build n-gram statistics and the trigram LM")
    p.add_argument("--corpus", help="training text, one sentence per line")
    p.add_argument("--k", type=float, help="add-k smoothing constant (default 0.1)")
    p.add_argument("--out")

    p = sub.add_parser("extract", help="write the 24-feature TSV for a corpus")
    _add_resource_flags(p)
    p.add_argument("--human", help="HEval scores JSONL; adds a target column")
    p.add_argument("--out")

    p = sub.add_parser("train", help="train a MaTrA model from a feature TSV with targets")
    p.add_argument("--features")
    p.add_argument("--preset", choices=sorted(neural.PRESETS))
    p.add_argument("--input-dim", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--l1", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--validation-fraction", type=float)
    p.add_argument("--batch-norm", action="store_true", default=None)
    p.add_argument("--trace", help="optional per-epoch loss trace TSV")
    p.add_argument("--out")

    p = sub.add_parser("score", help="score segments with a trained model")
    _add_resource_flags(p)
    p.add_argument("--model")
    p.add_argument("--metric-name", help="metric name in the output (default MaTrA)")
    p.add_argument("--out")

    p = sub.add_parser("baselines", help="BLEU, chrF++, METEOR-lite and LEPOR per segment")
    p.add_argument("--corpus")
    p.add_argument("--stem-rules")
    p.add_argument("--out")

    p = sub.add_parser("evaluate", help="system-level and correlation reports")
    p.add_argument("--scores", nargs="+", help="metric score TSV files")
    p.add_argument("--human")
    p.add_argument("--corpus")
    p.add_argument("--metrics", help="comma-separated metric column order")
    p.add_argument("--pooled", action="store_true", default=None,
                   help="one pooled correlation instead of one per system")
    p.add_argument("--out", help="output directory")

    for sp in sub.choices.values():
        sp.add_argument("--config", help="flat 'key = value' config file")
    return parser


DEFAULTS = {
    "k": 0.1, "preset": "matra1", "epochs": 500, "batch_size": 32, "dropout": 0.2,
    "l1": 1e-5, "lr": 1e-3, "seed": 0, "validation_fraction": 0.1, "batch_norm": False,
    "no_embedding_fallback": False, "quartile_side": "candidate", "metric_name": "MaTrA",
    "pooled": False,
}

_TYPES = {"k": float, "input_dim": int, "epochs": int, "batch_size": int, "dropout": float,
          "l1": float, "lr": float, "seed": int, "validation_fraction": float}
_FLAGS = {"batch_norm", "no_embedding_fallback", "pooled"}


def merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from --config, then from DEFAULTS."""
    if args.config:
        for key, raw in read_config(args.config).items():
            if not hasattr(args, key) or key in ("command", "config"):
                raise UsageError(f"{args.config}: unknown option {key!r} for '{args.command}'")
            if getattr(args, key) is not None:
                continue
            if key in _FLAGS:
                value = raw.lower() in ("1", "true", "yes", "on")
            elif key == "scores":
                value = raw.split()
            else:
                try:
                    value = _TYPES.get(key, str)(raw)
                except ValueError:
                    raise UsageError(f"{args.config}: bad value {raw!r} for {key}") from None
            setattr(args, key, value)
    for key, value in DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, []):
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _existing(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    return path


def _resources(args):
    for name in ("stats", "word_vectors", "embeddings", "stopwords_src", "stopwords_tgt",
                 "stem_rules", "pos_lexicon"):
        if getattr(args, name):
            _existing(getattr(args, name))
    return load_resources(args.stats, word_vectors=args.word_vectors, embeddings=args.embeddings,
                          stopwords_src=args.stopwords_src, stopwords_tgt=args.stopwords_tgt,
                          stem_rules=args.stem_rules, pos_lexicon=args.pos_lexicon,
                          embedding_fallback=not args.no_embedding_fallback,
                          quartile_side=args.quartile_side)


def read_sentences(path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [text.tokenize(line) for line in fh if line.strip()]


def cmd_stats(args) -> int:
    _require(args, "corpus", "out")
    sentences = read_sentences(_existing(args.corpus))
    if not sentences:
        raise UsageError(f"{args.corpus}: no sentences")
    stats = lexstats.build_statistics(sentences)
    lm = lexstats.lm_train(sentences, args.k)
    lexstats.save_artifact(stats, lm, args.out)
    log.info("stats: %d sentences, %d tokens -> %s", len(sentences), stats.total_tokens, args.out)
    return 0


def cmd_extract(args) -> int:
    _require(args, "corpus", "stats", "out")
    segments = corpus.load_corpus(_existing(args.corpus))
    res = _resources(args)
    vectors = [features.extract(seg, res) for seg in segments]
    targets = None
    if args.human:
        human = corpus.load_human_scores(_existing(args.human))
        missing = [s.segment_id for s in segments if s.segment_id not in human]
        if missing:
            raise UsageError(f"{args.human}: no human scores for {len(missing)} segment(s), "
                             f"e.g. {missing[0]!r}")
        targets = [corpus.heval_target(human[s.segment_id]) for s in segments]
    features.write_feature_table(args.out, segments, vectors, targets)
    log.info("extract: %d segments -> %s", len(segments), args.out)
    return 0


def cmd_train(args) -> int:
    _require(args, "features", "out")
    table = features.read_feature_table(_existing(args.features))
    if table.targets is None:
        raise UsageError(f"{args.features}: no target column; run extract with --human")
    input_dim = args.input_dim or table.X.shape[1]
    if input_dim != table.X.shape[1]:
        raise UsageError(f"--input-dim {input_dim} but the feature file has {table.X.shape[1]} columns")
    try:
        config = neural.ModelConfig.preset(args.preset, input_dim=input_dim,
                                           dropout_rate=args.dropout, l1_lambda=args.l1,
                                           use_batch_norm=args.batch_norm, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    def progress(epoch, tr, val):
        if epoch % 50 == 0 or epoch == args.epochs:
            held_out = "no validation rows" if math.isnan(val) else f"validation mse {val:.6g}"
            log.info("epoch %d: train loss %.6g, %s", epoch, tr, held_out)

    result = neural.train(config, table.X, table.targets, epochs=args.epochs,
                          batch_size=args.batch_size, validation_fraction=args.validation_fraction,
                          lr=args.lr, log=progress)
    neural.save_model(result.params, config, result.normalization, args.out)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epoch\ttrain_loss\tvalidation_mse\n")
            for i, (tr, val) in enumerate(zip(result.train_loss, result.val_mse), 1):
                fh.write(f"{i}\t{tr!r}\t{val!r}\n")
    return 0


def cmd_score(args) -> int:
    _require(args, "corpus", "stats", "model", "out")
    params, config, norm = neural.load_model(_existing(args.model))
    segments = corpus.load_corpus(_existing(args.corpus))
    res = _resources(args)
    if config.input_dim != features.N_FEATURES:
        raise UsageError(f"model expects {config.input_dim} inputs, features have "
                         f"{features.N_FEATURES}")
    X = np.array([features.extract(seg, res) for seg in segments], dtype=np.float64)
    scores = neural.predict(params, config, X, norm) if len(segments) else []
    corpus.write_scores([corpus.MetricScore(seg.segment_id, args.metric_name, float(s))
                         for seg, s in zip(segments, scores)], args.out)
    return 0


def cmd_baselines(args) -> int:
    _require(args, "corpus", "out")
    segments = corpus.load_corpus(_existing(args.corpus))
    rules = text.load_stem_rules(_existing(args.stem_rules) if args.stem_rules
                                 else text.bundled("stem_rules_gu.tsv"))
    corpus.write_scores(basemetrics.score_segments(segments, rules), args.out)
    return 0


def cmd_evaluate(args) -> int:
    _require(args, "scores", "human", "corpus", "out")
    scores = []
    for path in args.scores:
        scores.extend(corpus.load_external_scores(_existing(path)))
    human = {sid: corpus.heval_target(rec)
             for sid, rec in corpus.load_human_scores(_existing(args.human)).items()}
    segments = corpus.load_corpus(_existing(args.corpus))
    metrics = args.metrics.split(",") if args.metrics else None
    os.makedirs(args.out, exist_ok=True)

    sys_report = evalharness.system_average(scores, segments, metrics)
    corr = evalharness.correlate_with_human(scores, human, segments,
                                            group_by_system=not args.pooled, metrics=metrics)
    for report, stem in ((sys_report, "system_scores"), (corr, "correlation")):
        for fmt in ("tsv", "json"):
            evalharness.emit_report(report, fmt, os.path.join(args.out, f"{stem}.{fmt}"))
    if corr.degenerate:
        cells = ", ".join(f"{s}/{m}" for s, m in corr.degenerate)
        print(f"matra: error: degenerate correlation (constant scores) for: {cells}",
              file=sys.stderr)
        return 1
    return 0


COMMANDS = {"stats": cmd_stats, "extract": cmd_extract, "train": cmd_train, "score": cmd_score,
            "baselines": cmd_baselines, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="matra: %(message)s", stream=sys.stderr)
    try:
        merge_config(args)
        return COMMANDS[args.command](args)
    except (neural.TrainingDiverged, evalharness.DegenerateCorrelation) as exc:
        _fail(exc)
        return 1
    except (UsageError, OSError, ValueError, MissingEmbeddingError) as exc:
        # CorpusError, ModelFormatError and JoinError are ValueErrors
        _fail(exc)
        return 2


def _fail(exc: BaseException) -> None:
    msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
    print(f"matra: error: {msg}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
