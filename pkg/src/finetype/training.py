"""Training loops, run configuration, and checkpoint-backed evaluation.

Both models train single-threaded with a seeded PRNG that owns every
source of randomness (epoch shuffles and dropout masks), so two runs with
the same seed, data order, and config produce bitwise-identical
checkpoints.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import metrics
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import Document, LabelVocab, Mention, token_label_matrix
from .e2e_model import E2EModel, concat_layer, e2e_predict
from .errors import ConfigError, DataError
from .mention_model import MentionModel, mention_predict
from .metrics import EvalUnit, MetricReport
from .tokenize_embed import (
    ContextualStoreProvider,
    UniformProvider,
    build_context_triple,
    embed_sequence,
    load_word_vectors,
    load_wordpiece_vocab,
)

SEED_ENV_VAR = "FINETYPE_SEED"


@dataclass
class TrainConfig:
    model: str = "mention"            # mention | e2e
    attention: str = "none"           # none | scalar | dynamic (mention only)
    embedding: str = "uniform"        # uniform | word_vectors | contextual_store
    embedding_dim: int = 768
    embedding_path: str | None = None
    wordpiece_vocab: str | None = None
    embedding_seed: int = 0
    lr: float = 0.0001
    hidden: int = 768
    dropout: float = 0.5
    batch_size: int | None = None     # None -> 100 mention / 10 e2e
    window_W: int = 10
    max_seq_len: int = 100
    seed: int = 0
    max_epochs: int = 50
    patience: int = 5

    def __post_init__(self):
        if self.model not in ("mention", "e2e"):
            raise ConfigError(f"model must be 'mention' or 'e2e', got {self.model!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            self.seed = int(env_seed)

    @property
    def resolved_batch_size(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return 100 if self.model == "mention" else 10

    def as_dict(self) -> dict:
        d = asdict(self)
        d["batch_size"] = self.resolved_batch_size
        return d

    @classmethod
    def from_file(cls, path, **overrides) -> "TrainConfig":
        """Flat key = value text file; '#' starts a comment."""
        values: dict = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path} line {lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            values[key] = raw
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        kwargs = {}
        fields_ = cls.__dataclass_fields__
        for key, raw in values.items():
            if key not in fields_:
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None or isinstance(raw, (int, float)):
                kwargs[key] = raw
                continue
            raw = str(raw)
            if key in ("lr", "dropout"):
                kwargs[key] = float(raw)
            elif key in ("embedding_dim", "embedding_seed", "hidden", "batch_size",
                         "window_W", "max_seq_len", "seed", "max_epochs", "patience"):
                kwargs[key] = None if raw == "none" else int(raw)
            elif raw == "none" and key in ("embedding_path", "wordpiece_vocab"):
                kwargs[key] = None
            else:
                kwargs[key] = raw
        return cls(**kwargs)


def build_provider(config: TrainConfig):
    if config.embedding == "uniform":
        vocab = load_wordpiece_vocab(config.wordpiece_vocab) if config.wordpiece_vocab else None
        return UniformProvider(dim=config.embedding_dim, seed=config.embedding_seed,
                               vocab=vocab)
    if config.embedding == "word_vectors":
        if not config.embedding_path:
            raise ConfigError("word_vectors embedding requires embedding_path")
        provider = load_word_vectors(config.embedding_path)
        if provider.dim != config.embedding_dim:
            raise ConfigError(
                f"word-vector file dim {provider.dim} != configured {config.embedding_dim}"
            )
        return provider
    if config.embedding == "contextual_store":
        if not config.embedding_path:
            raise ConfigError("contextual_store embedding requires embedding_path")
        provider = ContextualStoreProvider.load(config.embedding_path)
        if provider.dim != config.embedding_dim:
            raise ConfigError(
                f"contextual store dim {provider.dim} != configured {config.embedding_dim}"
            )
        return provider
    raise ConfigError(f"unknown embedding kind {config.embedding!r}")


# -- example preparation --------------------------------------------------------


@dataclass
class MentionExample:
    doc_id: str
    mention_index: int
    triple: object
    gold_labels: frozenset[str]
    target: np.ndarray


def prepare_mention_examples(docs, provider, vocab: LabelVocab,
                             W: int) -> list[MentionExample]:
    examples = []
    for doc in docs:
        if not doc.mentions:
            continue
        seq, emb = embed_sequence(doc, provider)
        for mi, m in enumerate(doc.mentions):
            triple = build_context_triple(seq, emb, (m.start, m.end), W)
            target = np.zeros(len(vocab))
            for i in vocab.indices(m.labels):
                target[i] = 1.0
            examples.append(MentionExample(
                doc_id=doc.doc_id, mention_index=mi, triple=triple,
                gold_labels=m.labels, target=target,
            ))
    return examples


@dataclass
class E2EExample:
    doc: Document
    pieces: list[str]
    word_index: list[int]
    emb: np.ndarray               # T x d, already truncated
    piece_targets: np.ndarray     # T x N
    dropped_mentions: int


def prepare_e2e_examples(docs, provider, vocab: LabelVocab,
                         max_seq_len: int) -> list[E2EExample]:
    """Embed, truncate to max_seq_len wordpieces, propagate word targets.

    Each wordpiece inherits its source word's target row. Mentions whose
    pieces all fall beyond the truncation point are dropped from the
    sentence's targets and counted.
    """
    examples = []
    for doc in docs:
        seq, emb = embed_sequence(doc, provider)
        word_targets = token_label_matrix(doc, vocab)
        pieces = seq.pieces[:max_seq_len]
        word_index = seq.word_index[:max_seq_len]
        emb = emb[:max_seq_len]
        dropped = 0
        if len(seq) > max_seq_len:
            kept_words = set(word_index)
            for m in doc.mentions:
                if not any(w in kept_words for w in range(m.start, m.end)):
                    dropped += 1
        piece_targets = (
            word_targets[word_index] if pieces else np.zeros((0, len(vocab)))
        )
        examples.append(E2EExample(
            doc=doc, pieces=pieces, word_index=word_index, emb=emb,
            piece_targets=piece_targets, dropped_mentions=dropped,
        ))
    return examples


def assemble_e2e_batch(batch: list[E2EExample], dim: int, n_labels: int):
    """Pad to the longest sentence in the batch; returns (emb, targets, mask)."""
    T = max(len(ex.pieces) for ex in batch)
    B = len(batch)
    emb = np.zeros((T, B, dim))
    targets = np.zeros((T, B, n_labels))
    mask = np.zeros((T, B))
    for b, ex in enumerate(batch):
        n = len(ex.pieces)
        if n:
            emb[:n, b, :] = ex.emb
            targets[:n, b, :] = ex.piece_targets
            mask[:n, b] = 1.0
    return emb, targets, mask


# -- evaluation -----------------------------------------------------------------


def mention_eval_units(model: MentionModel, examples: list[MentionExample],
                       vocab: LabelVocab) -> list[EvalUnit]:
    if not examples:
        return []
    scores = model.forward_triples([ex.triple for ex in examples], mode="eval").data
    return [
        EvalUnit(
            gold=frozenset(vocab.gold_indices(ex.gold_labels)),
            pred=frozenset(mention_predict(row)),
            unit_id=(ex.doc_id, ex.mention_index),
        )
        for ex, row in zip(examples, scores)
    ]


def e2e_token_scores(model: E2EModel, example: E2EExample) -> np.ndarray:
    """Word-level scores for one document (eval mode, batch of one)."""
    if not example.pieces:
        return np.zeros((len(example.doc.tokens), model.n_labels))
    emb = Tensor(example.emb[:, None, :])
    piece_scores = model.forward(emb, mode="eval").data[:, 0, :]
    word_scores = concat_layer(piece_scores, example.word_index)
    n_words = len(example.doc.tokens)
    if word_scores.shape[0] < n_words:
        # truncated tail words predict nothing
        pad = np.zeros((n_words - word_scores.shape[0], model.n_labels))
        word_scores = np.vstack([word_scores, pad])
    return word_scores


def e2e_token_predictions(model: E2EModel, examples: list[E2EExample]
                          ) -> dict[str, list[set[int]]]:
    return {
        ex.doc.doc_id: e2e_predict(e2e_token_scores(model, ex)) for ex in examples
    }


def all_token_units(token_preds: dict[str, list[set[int]]], docs,
                    vocab: LabelVocab) -> list[EvalUnit]:
    units = []
    for doc in docs:
        preds = token_preds.get(doc.doc_id, [set()] * len(doc.tokens))
        gold_per_token: list[set[int]] = [set() for _ in doc.tokens]
        for m in doc.mentions:
            idxs = vocab.gold_indices(m.labels)
            for t in range(m.start, m.end):
                gold_per_token[t] |= idxs
        for t, gold in enumerate(gold_per_token):
            units.append(EvalUnit(
                gold=frozenset(gold), pred=frozenset(preds[t]),
                unit_id=(doc.doc_id, t),
            ))
    return units


def evaluate_model(model, docs, provider, vocab: LabelVocab, mode: str,
                   config: TrainConfig) -> MetricReport:
    if mode == "entity_level":
        if not isinstance(model, MentionModel):
            raise ConfigError("entity_level evaluation requires a mention model")
        examples = prepare_mention_examples(docs, provider, vocab, config.window_W)
        return metrics.report(mention_eval_units(model, examples, vocab))
    if mode in ("all_token", "e2e_as_mention"):
        if not isinstance(model, E2EModel):
            raise ConfigError(f"{mode} evaluation requires an e2e model")
        examples = prepare_e2e_examples(docs, provider, vocab, config.max_seq_len)
        token_preds = e2e_token_predictions(model, examples)
        if mode == "all_token":
            return metrics.report(all_token_units(token_preds, docs, vocab))
        return metrics.evaluate_e2e_as_mention_level(token_preds, docs, vocab)
    raise ConfigError(f"unknown evaluation mode {mode!r}")


# -- training -------------------------------------------------------------------


@dataclass
class TrainRunRecord:
    config: dict
    seed: int
    epoch_reports: list[MetricReport] = field(default_factory=list)
    best_epoch: int = -1
    best_dev_micro_f1: float = float("-inf")
    checkpoint_path: str | None = None
    diverged: bool = False
    dropped_mentions: int = 0


def _save_model(path, model, vocab: LabelVocab, config: TrainConfig):
    meta = model.meta()
    meta["labels"] = vocab.labels
    meta["config"] = config.as_dict()
    save_checkpoint(path, model.store.state_arrays(), meta=meta)


def load_model(path, seed: int = 0):
    """Rebuild a model (and its label vocab) from a checkpoint."""
    arrays, meta = load_checkpoint(path)
    if meta.get("model") == "mention":
        model = MentionModel.from_meta(meta, seed=seed)
    elif meta.get("model") == "e2e":
        model = E2EModel.from_meta(meta, seed=seed)
    else:
        raise DataError(f"{path}: checkpoint has unknown model kind {meta.get('model')!r}")
    model.store.load_state(arrays)
    vocab = LabelVocab(meta["labels"])
    config = TrainConfig.from_dict(meta.get("config", {}))
    return model, vocab, config


def train(config: TrainConfig, train_docs, dev_docs, provider,
          checkpoint_path, max_steps: int | None = None,
          log=lambda msg: None) -> TrainRunRecord:
    """Train either model with epoch-level dev selection and early stopping.

    Dev micro-F1 (entity-level for the mention model, all-token for the
    tagger) drives both checkpoint selection and patience. On divergence
    (non-finite loss) training aborts and the last good checkpoint stays
    on disk.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    vocab = LabelVocab.from_documents(train_docs)
    if len(vocab) == 0:
        raise DataError("training corpus contains no labeled mentions")

    record = TrainRunRecord(config=config.as_dict(), seed=config.seed)
    batch_size = config.resolved_batch_size

    if config.model == "mention":
        model = MentionModel(
            dim=provider.dim, hidden=config.hidden, n_labels=len(vocab),
            attention=config.attention, dropout=config.dropout, seed=config.seed,
        )
        examples = prepare_mention_examples(train_docs, provider, vocab, config.window_W)
        if not examples:
            raise DataError("no mention examples in the training corpus")
        dev_mode = "entity_level"
    else:
        model = E2EModel(
            dim=provider.dim, hidden=config.hidden, n_labels=len(vocab),
            dropout=config.dropout, seed=config.seed,
        )
        examples = prepare_e2e_examples(train_docs, provider, vocab, config.max_seq_len)
        examples = [ex for ex in examples if ex.pieces]
        record.dropped_mentions = sum(ex.dropped_mentions for ex in examples)
        dev_mode = "all_token"

    steps = 0
    stale = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(examples))
        for start in range(0, len(examples), batch_size):
            batch = [examples[i] for i in order[start:start + batch_size]]
            model.store.zero_grad()
            if config.model == "mention":
                scores = model.forward_triples(
                    [ex.triple for ex in batch], mode="train", rng=rng)
                loss = model.loss(scores, np.stack([ex.target for ex in batch]))
            else:
                emb, targets, mask = assemble_e2e_batch(
                    batch, provider.dim, len(vocab))
                scores = model.forward(Tensor(emb), mode="train", rng=rng,
                                       pad_mask=mask)
                loss = model.loss(scores, targets, mask)
            if not np.isfinite(loss.data):
                record.diverged = True
                log(f"epoch {epoch}: loss diverged, aborting "
                    f"(best checkpoint from epoch {record.best_epoch} retained)")
                return record
            loss.backward()
            model.store.adam_step(config.lr)
            steps += 1
            if max_steps is not None and steps >= max_steps:
                break

        dev_report = evaluate_model(model, dev_docs, provider, vocab, dev_mode, config)
        record.epoch_reports.append(dev_report)
        log(f"epoch {epoch}: dev micro-F1 {dev_report.micro_f1:.4f} "
            f"(strict {dev_report.strict_acc:.4f})")
        if dev_report.micro_f1 > record.best_dev_micro_f1:
            record.best_dev_micro_f1 = dev_report.micro_f1
            record.best_epoch = epoch
            _save_model(checkpoint_path, model, vocab, config)
            record.checkpoint_path = str(checkpoint_path)
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
        if max_steps is not None and steps >= max_steps:
            break
    return record


# -- prediction files ----------------------------------------------------------


def write_mention_predictions(path, model: MentionModel,
                              examples: list[MentionExample], vocab: LabelVocab):
    scores = model.forward_triples([ex.triple for ex in examples], mode="eval").data \
        if examples else np.zeros((0, len(vocab)))
    with open(path, "w", encoding="utf-8") as f:
        for ex, row in zip(examples, scores):
            pred = sorted(mention_predict(row))
            f.write(json.dumps({
                "doc_id": ex.doc_id,
                "mention_index": ex.mention_index,
                "predicted_labels": [vocab.labels[i] for i in pred],
                "scores": [float(s) for s in row],
            }) + "\n")


def write_e2e_predictions(path, model: E2EModel, examples: list[E2EExample],
                          vocab: LabelVocab):
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            word_scores = e2e_token_scores(model, ex)
            for t, row in enumerate(word_scores):
                pred = sorted(np.flatnonzero(row > 0.5))
                f.write(json.dumps({
                    "doc_id": ex.doc.doc_id,
                    "token_index": t,
                    "predicted_labels": [vocab.labels[int(i)] for i in pred],
                    "scores": [float(s) for s in row],
                }) + "\n")


def report_from_prediction_file(path, docs, vocab: LabelVocab,
                                mode: str) -> MetricReport:
    """Re-score a dumped prediction file; must equal the live evaluation."""
    rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    if mode == "entity_level":
        by_key = {(r["doc_id"], r["mention_index"]): r for r in rows}
        units = []
        for doc in docs:
            for mi, m in enumerate(doc.mentions):
                r = by_key.get((doc.doc_id, mi))
                pred = {vocab.index[lbl] for lbl in r["predicted_labels"]} if r else set()
                units.append(EvalUnit(
                    gold=frozenset(vocab.gold_indices(m.labels)),
                    pred=frozenset(pred), unit_id=(doc.doc_id, mi),
                ))
        return metrics.report(units)
    if mode in ("all_token", "e2e_as_mention"):
        token_preds: dict[str, list[set[int]]] = {
            doc.doc_id: [set() for _ in doc.tokens] for doc in docs
        }
        for r in rows:
            preds = token_preds.get(r["doc_id"])
            if preds is not None and r["token_index"] < len(preds):
                preds[r["token_index"]] = {vocab.index[lbl] for lbl in r["predicted_labels"]}
        if mode == "all_token":
            return metrics.report(all_token_units(token_preds, docs, vocab))
        return metrics.evaluate_e2e_as_mention_level(token_preds, docs, vocab)
    raise ConfigError(f"unknown evaluation mode {mode!r}")
