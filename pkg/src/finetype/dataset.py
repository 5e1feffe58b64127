"""Corpus records, label vocabulary, and dataset-split construction.

The corpus file format is line-delimited JSON, one sentence per line:

    {"doc_id": "...", "tokens": ["..."],
     "mentions": [{"start": 0, "end": 1, "labels": ["/person"]}]}

``doc_id`` is optional; when absent it is synthesized from the file stem
and the 1-based line number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError


@dataclass(frozen=True)
class Mention:
    start: int
    end: int  # exclusive
    labels: frozenset[str]


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[str, ...]
    mentions: tuple[Mention, ...]


@dataclass
class LoadReport:
    documents: int = 0
    mentions: int = 0
    overlapping_mention_docs: list[str] = field(default_factory=list)


def _parse_mention(raw, n_tokens: int, lineno: int) -> Mention:
    try:
        start, end = int(raw["start"]), int(raw["end"])
        labels = [str(x) for x in raw["labels"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"line {lineno}: malformed mention record ({exc})") from exc
    if not labels:
        raise ParseError(f"line {lineno}: mention has no labels")
    if not all(lbl.startswith("/") for lbl in labels):
        raise ParseError(f"line {lineno}: labels must be hierarchical paths starting with '/'")
    if end <= start:
        raise ParseError(f"line {lineno}: mention end {end} <= start {start}")
    if start < 0 or end > n_tokens:
        raise ParseError(
            f"line {lineno}: mention span [{start}, {end}) outside sentence of {n_tokens} tokens"
        )
    return Mention(start=start, end=end, labels=frozenset(labels))


def load_corpus(path, report: LoadReport | None = None) -> list[Document]:
    """Parse a line-delimited corpus file into Documents, in file order."""
    path = Path(path)
    stem = path.stem
    docs: list[Document] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if "tokens" not in raw or not isinstance(raw["tokens"], list):
            raise ParseError(f"line {lineno}: missing 'tokens' list")
        tokens = tuple(str(t) for t in raw["tokens"])
        mentions = tuple(
            _parse_mention(m, len(tokens), lineno) for m in raw.get("mentions", [])
        )
        doc_id = str(raw.get("doc_id", f"{stem}:{lineno}"))
        doc = Document(doc_id=doc_id, tokens=tokens, mentions=mentions)
        docs.append(doc)
        if report is not None:
            report.documents += 1
            report.mentions += len(mentions)
            if _has_overlap(mentions):
                report.overlapping_mention_docs.append(doc_id)
    return docs


def _has_overlap(mentions) -> bool:
    spans = sorted((m.start, m.end) for m in mentions)
    return any(b_start < a_end for (_, a_end), (b_start, _) in zip(spans, spans[1:]))


def save_corpus(docs, path):
    """Inverse of load_corpus; round-trips value-exactly."""
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps({
                "doc_id": doc.doc_id,
                "tokens": list(doc.tokens),
                "mentions": [
                    {"start": m.start, "end": m.end, "labels": sorted(m.labels)}
                    for m in doc.mentions
                ],
            }) + "\n")


class LabelVocab:
    """Dense index <-> hierarchical label path map, built from training data.

    Labels unseen at build time are never silently dropped: callers get
    ``None`` back and the miss is counted in ``oov_count``.
    """

    def __init__(self, labels):
        self.labels: list[str] = list(labels)
        if len(set(self.labels)) != len(self.labels):
            raise DataError("duplicate labels in vocabulary")
        self.index: dict[str, int] = {lbl: i for i, lbl in enumerate(self.labels)}
        self.oov_count = 0
        self._oov_index: dict[str, int] = {}

    def __len__(self):
        return len(self.labels)

    @classmethod
    def from_documents(cls, docs) -> "LabelVocab":
        seen: dict[str, None] = {}
        for doc in docs:
            for m in doc.mentions:
                for lbl in sorted(m.labels):
                    seen.setdefault(lbl, None)
        return cls(seen.keys())

    def lookup(self, label: str) -> int | None:
        idx = self.index.get(label)
        if idx is None:
            self.oov_count += 1
        return idx

    def indices(self, labels) -> set[int]:
        """Dense indices only; OOV labels are counted and omitted (targets)."""
        return {i for i in (self.lookup(lbl) for lbl in labels) if i is not None}

    def gold_indices(self, labels) -> set[int]:
        """Indices for gold sets: OOV labels get stable negative sentinels.

        A sentinel can never be predicted, so unseen gold labels penalize
        recall instead of being silently dropped.
        """
        out = set()
        for lbl in sorted(labels):
            idx = self.index.get(lbl)
            if idx is None:
                self.oov_count += 1
                if lbl not in self._oov_index:
                    self._oov_index[lbl] = -(len(self._oov_index) + 1)
                idx = self._oov_index[lbl]
            out.add(idx)
        return out


@dataclass
class SplitSpec:
    train: list[Document]
    dev: list[Document]
    test: list[Document]
    provenance: str  # "original" or "modified"


def make_modified_split(corpus_test, kind: str, aux=None,
                        wiki_train_size: int = 50_000,
                        wiki_dev_size: int = 434) -> SplitSpec:
    """Rebuild train/dev/test from the clean test portion of a corpus.

    m_ontonotes_like: with n = len(corpus_test) and k = ceil(n/10), the
    first n-2k documents become train, the next k dev, the last k test
    (this is the only arithmetic consistent with the published modified
    counts). m_wiki_like: train/dev are a prefix of ``aux`` and the test
    set is passed through unchanged.
    """
    if kind == "m_ontonotes_like":
        n = len(corpus_test)
        if n < 3:
            raise DataError(f"need at least 3 documents for a modified split, got {n}")
        k = math.ceil(n / 10)
        train = list(corpus_test[: n - 2 * k])
        dev = list(corpus_test[n - 2 * k : n - k])
        test = list(corpus_test[n - k :])
        return SplitSpec(train=train, dev=dev, test=test, provenance="modified")
    if kind == "m_wiki_like":
        if aux is None:
            raise DataError("m_wiki_like split requires the original training corpus")
        needed = wiki_train_size + wiki_dev_size
        if len(aux) < needed:
            raise DataError(
                f"m_wiki_like needs {needed} aux documents, got {len(aux)}"
            )
        return SplitSpec(
            train=list(aux[:wiki_train_size]),
            dev=list(aux[wiki_train_size : wiki_train_size + wiki_dev_size]),
            test=list(corpus_test),
            provenance="modified",
        )
    raise DataError(f"unknown split kind {kind!r}")


def extract_mention_examples(split) -> list[tuple[Document, Mention]]:
    """One (document, mention) training example per mention, in stable order."""
    return [(doc, m) for doc in split for m in doc.mentions]


def token_label_matrix(doc: Document, vocab: LabelVocab) -> np.ndarray:
    """len(tokens) x N binary target matrix; rows union over covering mentions."""
    mat = np.zeros((len(doc.tokens), len(vocab)), dtype=np.float64)
    for m in doc.mentions:
        idxs = vocab.indices(m.labels)
        for t in range(m.start, m.end):
            for i in idxs:
                mat[t, i] = 1.0
    return mat


def corpus_stats(docs) -> dict:
    """Counts for the dataset report subcommand."""
    label_set = set()
    n_mentions = 0
    n_tokens = 0
    entity_tokens = 0
    for doc in docs:
        n_tokens += len(doc.tokens)
        covered = set()
        for m in doc.mentions:
            n_mentions += 1
            label_set.update(m.labels)
            covered.update(range(m.start, m.end))
        entity_tokens += len(covered)
    return {
        "sentences": len(docs),
        "mentions": n_mentions,
        "distinct_labels": len(label_set),
        "tokens": n_tokens,
        "entity_tokens": entity_tokens,
    }
