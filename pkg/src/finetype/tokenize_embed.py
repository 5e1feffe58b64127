"""WordPiece tokenization, embedding providers, and context windows.

Three providers supply frozen input vectors:

* uniform      -- a fixed pseudo-random vector per distinct wordpiece
                  string, stable across processes (hash-seeded);
* word_vectors -- word-level lookup from a GloVe-style text file, OOV
                  words map to the zero vector;
* contextual_store -- per-document wordpiece vectors precomputed offline,
                  loaded verbatim together with their segmentation.

The contextual store is line-delimited JSON (optionally gzipped): a
header record ``{"format_version": 1, "dim": d}`` followed by one record
per document ``{"doc_id", "pieces", "word_index", "vectors"}``.
"""

from __future__ import annotations

import gzip
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Document
from .errors import ConfigError, DataError, ParseError

UNK = "[UNK]"
PAD = "[PAD]"

STORE_FORMAT_VERSION = 1


@dataclass
class WordpieceSeq:
    pieces: list[str]
    word_index: list[int]  # source word position per piece
    is_pad: list[bool]

    def __len__(self):
        return len(self.pieces)

    def word_to_piece_span(self, word_start: int, word_end: int) -> tuple[int, int]:
        """Map a word span [start, end) to the covering piece span."""
        positions = [
            i for i, w in enumerate(self.word_index)
            if word_start <= w < word_end and not self.is_pad[i]
        ]
        if not positions:
            raise DataError(
                f"word span [{word_start}, {word_end}) maps to no wordpieces"
            )
        return positions[0], positions[-1] + 1


def load_wordpiece_vocab(path) -> set[str]:
    """BERT vocab format: one piece per line."""
    vocab = {line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()
             if line.strip()}
    if UNK not in vocab or PAD not in vocab:
        raise DataError(f"wordpiece vocab must contain {UNK} and {PAD}")
    return vocab


def wordpiece_tokenize(word: str, vocab: set[str], max_word_chars: int = 100) -> list[str]:
    """Greedy longest-match-first segmentation; unmatchable words become [UNK]."""
    if not word:
        raise DataError("cannot tokenize an empty word")
    if len(word) > max_word_chars:
        return [UNK]
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            sub = word[start:end]
            if start > 0:
                sub = "##" + sub
            if sub in vocab:
                match = sub
                break
            end -= 1
        if match is None:
            return [UNK]
        pieces.append(match)
        start = end
    return pieces


def tokenize_words(tokens, vocab: set[str], max_word_chars: int = 100) -> WordpieceSeq:
    pieces: list[str] = []
    word_index: list[int] = []
    for w, word in enumerate(tokens):
        for piece in wordpiece_tokenize(word, vocab, max_word_chars):
            pieces.append(piece)
            word_index.append(w)
    return WordpieceSeq(pieces=pieces, word_index=word_index, is_pad=[False] * len(pieces))


# -- providers ------------------------------------------------------------------


class UniformProvider:
    """Deterministic per-wordpiece-type vectors in uniform(-0.1, 0.1).

    Each distinct piece string gets its own PRNG stream seeded from a
    SHA-256 hash of (seed, string), so vectors survive process restarts.
    Without a wordpiece vocab, words pass through as single pieces.
    """

    kind = "uniform"

    def __init__(self, dim: int, seed: int = 0, vocab: set[str] | None = None,
                 max_word_chars: int = 100):
        if dim < 1:
            raise ConfigError(f"embedding dim must be positive, got {dim}")
        self.dim = dim
        self.seed = seed
        self.vocab = vocab
        self.max_word_chars = max_word_chars
        self._cache: dict[str, np.ndarray] = {}

    def vector(self, piece: str) -> np.ndarray:
        vec = self._cache.get(piece)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}\x00{piece}".encode("utf-8")).digest()
            rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "little")))
            vec = rng.uniform(-0.1, 0.1, size=self.dim)
            self._cache[piece] = vec
        return vec

    def embed(self, doc: Document) -> tuple[WordpieceSeq, np.ndarray]:
        if self.vocab is not None:
            seq = tokenize_words(doc.tokens, self.vocab, self.max_word_chars)
        else:
            seq = WordpieceSeq(
                pieces=list(doc.tokens),
                word_index=list(range(len(doc.tokens))),
                is_pad=[False] * len(doc.tokens),
            )
        emb = np.stack([self.vector(p) for p in seq.pieces]) if seq.pieces else \
            np.zeros((0, self.dim))
        return seq, emb


class WordVectorProvider:
    """Word-level lookup table; segmentation is one piece per word."""

    kind = "word_vectors"

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.vectors = vectors
        self.dim = dim

    def embed(self, doc: Document) -> tuple[WordpieceSeq, np.ndarray]:
        seq = WordpieceSeq(
            pieces=list(doc.tokens),
            word_index=list(range(len(doc.tokens))),
            is_pad=[False] * len(doc.tokens),
        )
        zero = np.zeros(self.dim)
        emb = np.stack([self.vectors.get(t, zero) for t in doc.tokens]) if doc.tokens \
            else np.zeros((0, self.dim))
        return seq, emb


class ContextualStoreProvider:
    """Per-document vectors and segmentation precomputed by the exporter.

    The store is authoritative for segmentation: whatever tokenizer the
    exporter used is trusted verbatim, so there is no cross-component
    tokenizer drift.
    """

    kind = "contextual_store"

    def __init__(self, records: dict[str, dict], dim: int):
        self.records = records
        self.dim = dim

    @classmethod
    def load(cls, path) -> "ContextualStoreProvider":
        records, dim = read_contextual_store(path)
        return cls(records, dim)

    def embed(self, doc: Document) -> tuple[WordpieceSeq, np.ndarray]:
        rec = self.records.get(doc.doc_id)
        if rec is None:
            raise DataError(f"contextual store has no record for document {doc.doc_id!r}")
        pieces = rec["pieces"]
        seq = WordpieceSeq(
            pieces=list(pieces),
            word_index=list(rec["word_index"]),
            is_pad=[False] * len(pieces),
        )
        return seq, np.asarray(rec["vectors"], dtype=np.float64)


def embed_sequence(doc: Document, provider) -> tuple[WordpieceSeq, np.ndarray]:
    """Tokenize + embed one document through any provider."""
    seq, emb = provider.embed(doc)
    if emb.ndim != 2 or (len(seq) and emb.shape != (len(seq), provider.dim)):
        raise ConfigError(
            f"provider returned embedding shape {emb.shape}, expected "
            f"({len(seq)}, {provider.dim})"
        )
    return seq, emb


# -- contextual store I/O ----------------------------------------------------


def _open_store(path, mode):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def read_contextual_store(path) -> tuple[dict[str, dict], int]:
    with _open_store(path, "r") as f:
        header_line = f.readline()
        if not header_line.strip():
            raise ParseError(f"{path}: empty contextual store")
        header = json.loads(header_line)
        if header.get("format_version") != STORE_FORMAT_VERSION:
            raise ParseError(
                f"{path}: unsupported store format_version {header.get('format_version')!r}"
            )
        dim = int(header["dim"])
        records: dict[str, dict] = {}
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            for key in ("doc_id", "pieces", "word_index", "vectors"):
                if key not in rec:
                    raise ParseError(f"{path} line {lineno}: missing {key!r}")
            if not (len(rec["pieces"]) == len(rec["word_index"]) == len(rec["vectors"])):
                raise ParseError(f"{path} line {lineno}: pieces/word_index/vectors lengths differ")
            if any(len(v) != dim for v in rec["vectors"]):
                raise ParseError(f"{path} line {lineno}: vector dimension != {dim}")
            records[str(rec["doc_id"])] = rec
    return records, dim


def write_contextual_store(path, records, dim: int):
    """records: iterable of dicts with doc_id/pieces/word_index/vectors."""
    with _open_store(path, "w") as f:
        f.write(json.dumps({"format_version": STORE_FORMAT_VERSION, "dim": dim}) + "\n")
        for rec in records:
            f.write(json.dumps({
                "doc_id": rec["doc_id"],
                "pieces": list(rec["pieces"]),
                "word_index": list(rec["word_index"]),
                "vectors": [[float(x) for x in v] for v in rec["vectors"]],
            }) + "\n")


# -- word-vector file ---------------------------------------------------------


def load_word_vectors(path) -> WordVectorProvider:
    """Parse a GloVe-style text file: one token then d floats per line."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    duplicates = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise ParseError(f"{path} line {lineno}: no vector values")
            if len(values) != dim:
                raise ParseError(
                    f"{path} line {lineno}: expected {dim} values, got {len(values)}"
                )
            try:
                vec = np.array([float(v) for v in values])
            except ValueError as exc:
                raise ParseError(f"{path} line {lineno}: non-numeric value ({exc})") from exc
            if token in vectors:
                duplicates += 1
            vectors[token] = vec
    if dim is None:
        raise ParseError(f"{path}: empty word-vector file")
    provider = WordVectorProvider(vectors, dim)
    provider.duplicate_count = duplicates
    return provider


# -- context windows ----------------------------------------------------------


@dataclass
class ContextTriple:
    c_l: np.ndarray
    c_r: np.ndarray
    c_m: np.ndarray
    window: int


def _window_average(emb: np.ndarray, positions: list[int], dim: int) -> np.ndarray:
    """Average over real (non-pad) positions; all-pad windows are zero."""
    if not positions:
        return np.zeros(dim)
    return emb[positions].mean(axis=0)


def build_context_triple(seq: WordpieceSeq, emb: np.ndarray,
                         mention_span: tuple[int, int], W: int) -> ContextTriple:
    """Average W-piece left / right / mention windows around a word span.

    Windows shorter than W are implicitly padded; pad positions embed as
    zero and are excluded from the averaging denominator. Mentions longer
    than W pieces are trimmed to their first W pieces.
    """
    if W < 1:
        raise ConfigError(f"context window must be >= 1, got {W}")
    word_start, word_end = mention_span
    n_words = max(seq.word_index, default=-1) + 1
    if not (0 <= word_start < word_end <= n_words):
        raise DataError(
            f"mention span [{word_start}, {word_end}) out of bounds for {n_words} words"
        )
    p_start, p_end = seq.word_to_piece_span(word_start, word_end)
    dim = emb.shape[1]
    left = list(range(max(0, p_start - W), p_start))
    right = list(range(p_end, min(len(seq), p_end + W)))[:W]
    mention = list(range(p_start, min(p_end, p_start + W)))
    real = lambda idxs: [i for i in idxs if not seq.is_pad[i]]
    return ContextTriple(
        c_l=_window_average(emb, real(left), dim),
        c_r=_window_average(emb, real(right), dim),
        c_m=_window_average(emb, real(mention), dim),
        window=W,
    )
