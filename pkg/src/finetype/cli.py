"""Command-line surface: train / evaluate / predict / gradcheck / split / report.

Exit codes: 0 success, 1 usage error, 2 data error. Every run prints its
resolved configuration so a run can be replayed exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import training
from .autodiff import Tensor
from .dataset import (
    corpus_stats,
    load_corpus,
    make_modified_split,
    save_corpus,
)
from .e2e_model import E2EModel
from .errors import ConfigError, DataError, FinetypeError
from .mention_model import MentionModel
from .nn import grad_check
from .training import TrainConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def _config_from_args(args) -> TrainConfig:
    overrides = {
        "model": args.model,
        "attention": args.attention,
        "embedding": args.embedding,
        "embedding_dim": args.embedding_dim,
        "embedding_path": args.embedding_path,
        "wordpiece_vocab": args.wordpiece_vocab,
        "seed": args.seed,
    }
    if args.config:
        return TrainConfig.from_file(args.config, **overrides)
    return TrainConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def _print_config(config: TrainConfig):
    print("resolved config:")
    for key, value in config.as_dict().items():
        print(f"  {key} = {value}")


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{what} not found: {p}")
    return p


def cmd_train(args) -> int:
    config = _config_from_args(args)
    _print_config(config)
    train_docs = load_corpus(_require_file(args.corpus, "training corpus"))
    dev_docs = load_corpus(_require_file(args.dev, "dev corpus"))
    provider = training.build_provider(config)
    record = training.train(config, train_docs, dev_docs, provider,
                            checkpoint_path=args.out, log=print)
    if record.checkpoint_path is None:
        raise DataError("training produced no checkpoint")
    print(f"best epoch {record.best_epoch} "
          f"(dev micro-F1 {record.best_dev_micro_f1:.4f}) -> {record.checkpoint_path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model, vocab, config = training.load_model(
        _require_file(args.checkpoint, "checkpoint"))
    _print_config(config)
    docs = load_corpus(_require_file(args.corpus, "corpus"))
    if args.predictions:
        rep = training.report_from_prediction_file(
            _require_file(args.predictions, "prediction file"), docs, vocab, args.mode)
    else:
        provider = training.build_provider(config)
        rep = training.evaluate_model(model, docs, provider, vocab, args.mode, config)
    print(rep.table(title=f"{args.mode} evaluation over {rep.unit_count} units"))
    if args.out:
        Path(args.out).write_text(json.dumps(rep.as_dict(), indent=2))
    return EXIT_OK


def cmd_predict(args) -> int:
    model, vocab, config = training.load_model(
        _require_file(args.checkpoint, "checkpoint"))
    _print_config(config)
    docs = load_corpus(_require_file(args.corpus, "corpus"))
    provider = training.build_provider(config)
    if isinstance(model, MentionModel):
        examples = training.prepare_mention_examples(
            docs, provider, vocab, config.window_W)
        training.write_mention_predictions(args.out, model, examples, vocab)
    else:
        examples = training.prepare_e2e_examples(
            docs, provider, vocab, config.max_seq_len)
        training.write_e2e_predictions(args.out, model, examples, vocab)
    print(f"wrote predictions to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rng = np.random.Generator(np.random.PCG64(args.seed or 0))
    if args.model == "mention":
        model = MentionModel(dim=5, hidden=6, n_labels=4, attention="dynamic",
                             dropout=0.0, seed=args.seed or 0)
        c_l, c_r, c_m = (Tensor(rng.normal(size=(2, 5))) for _ in range(3))
        targets = (rng.random((2, 4)) < 0.5).astype(float)
        closure = lambda: model.loss(model.forward(c_l, c_r, c_m, mode="eval"), targets)
    else:
        model = E2EModel(dim=4, hidden=5, n_labels=3, dropout=0.0, seed=args.seed or 0)
        emb = Tensor(rng.normal(size=(4, 2, 4)))
        targets = (rng.random((4, 2, 3)) < 0.5).astype(float)
        mask = np.ones((4, 2))
        closure = lambda: model.loss(model.forward(emb, mode="eval"), targets, mask)
    report = grad_check(closure, model.store, tolerance=1e-4)
    for name, err in report.per_param.items():
        status = "ok" if err < report.tolerance else "FAIL"
        print(f"{name:24s} max rel err {err:.3e}  {status}")
    return EXIT_OK if report.passed else EXIT_DATA


def cmd_split(args) -> int:
    docs = load_corpus(_require_file(args.corpus, "corpus"))
    aux = load_corpus(_require_file(args.aux, "aux corpus")) if args.aux else None
    spec = make_modified_split(docs, kind=args.kind, aux=aux)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", spec.train), ("dev", spec.dev), ("test", spec.test)):
        save_corpus(part, out_dir / f"{name}.jsonl")
    print(f"split sizes: {len(spec.train)} / {len(spec.dev)} / {len(spec.test)}")
    return EXIT_OK


def cmd_report(args) -> int:
    print(f"{'corpus':30s} {'#sent':>8} {'#ment':>8} {'#labels':>8} "
          f"{'#tokens':>9} {'#ent-tok':>9}")
    for path in args.corpora:
        stats = corpus_stats(load_corpus(_require_file(path, "corpus")))
        print(f"{Path(path).name:30s} {stats['sentences']:>8} {stats['mentions']:>8} "
              f"{stats['distinct_labels']:>8} {stats['tokens']:>9} "
              f"{stats['entity_tokens']:>9}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finetype",
        description="Train and evaluate fine-grained entity-typing models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--model", choices=["mention", "e2e"])
        p.add_argument("--attention", choices=["none", "scalar", "dynamic"])
        p.add_argument("--embedding",
                       choices=["uniform", "word_vectors", "contextual_store"])
        p.add_argument("--embedding-dim", dest="embedding_dim", type=int)
        p.add_argument("--embedding-path", dest="embedding_path")
        p.add_argument("--wordpiece-vocab", dest="wordpiece_vocab")
        p.add_argument("--seed", type=int)

    p_train = sub.add_parser("train", help="train a model")
    add_config_flags(p_train)
    p_train.add_argument("--corpus", required=True, help="training corpus (jsonl)")
    p_train.add_argument("--dev", required=True, help="dev corpus (jsonl)")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="score a checkpoint on a corpus")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--corpus", required=True)
    p_eval.add_argument("--mode", default="entity_level",
                        choices=["entity_level", "all_token", "e2e_as_mention"])
    p_eval.add_argument("--predictions",
                        help="score a dumped prediction file instead of the live model")
    p_eval.add_argument("--out", help="write the report as JSON")
    p_eval.set_defaults(func=cmd_evaluate)

    p_pred = sub.add_parser("predict", help="dump per-unit predictions")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--corpus", required=True)
    p_pred.add_argument("--out", required=True)
    p_pred.set_defaults(func=cmd_predict)

    p_grad = sub.add_parser("gradcheck",
                            help="finite-difference check of a small model instance")
    p_grad.add_argument("--model", choices=["mention", "e2e"], required=True)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_split = sub.add_parser("split", help="build a modified dataset split")
    p_split.add_argument("--corpus", required=True, help="clean test corpus")
    p_split.add_argument("--kind", required=True,
                         choices=["m_ontonotes_like", "m_wiki_like"])
    p_split.add_argument("--aux", help="original training corpus (m_wiki_like)")
    p_split.add_argument("--out-dir", dest="out_dir", required=True)
    p_split.set_defaults(func=cmd_split)

    p_report = sub.add_parser("report", help="corpus statistics")
    p_report.add_argument("corpora", nargs="+")
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (DataError,) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FinetypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
