"""Run a pretrained transformer over a corpus and write a contextual store.

The store is line-delimited JSON: a header ``{"format_version": 1, "dim": D}``
followed by one record per document with the model's own wordpiece
segmentation::

    {"doc_id": ..., "pieces": [...], "word_index": [...], "vectors": [[...], ...]}

Special tokens ([CLS]/[SEP]/pad) are stripped; only content wordpieces are
emitted, each carrying its last-hidden-layer vector. Inference only — the
model runs in eval mode with no gradient tracking, so output is deterministic
given the weights.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field
from pathlib import Path

import torch

STORE_FORMAT_VERSION = 1


class ExportError(Exception):
    pass


@dataclass
class ExportJob:
    corpus: str
    model: str
    out: str
    batch_size: int = 32
    layer: str = "last_hidden"

    def __post_init__(self):
        if self.layer != "last_hidden":
            raise ExportError(f"unsupported layer selection {self.layer!r}")
        if self.batch_size < 1:
            raise ExportError(f"batch_size must be positive, got {self.batch_size}")


@dataclass
class ExportReport:
    documents: int = 0
    truncated: int = 0
    normalization_mismatches: int = 0
    dim: int = 0
    report_path: str = ""

    def as_dict(self) -> dict:
        return {
            "documents": self.documents,
            "truncated": self.truncated,
            "normalization_mismatches": self.normalization_mismatches,
            "dim": self.dim,
        }


def read_corpus(path) -> list[tuple[str, list[str]]]:
    """Parse the corpus interchange format: JSONL with a 'tokens' list per line."""
    path = Path(path)
    docs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ExportError(f"{path} line {lineno}: invalid JSON ({exc.msg})") from exc
        if "tokens" not in raw or not isinstance(raw["tokens"], list):
            raise ExportError(f"{path} line {lineno}: missing 'tokens' list")
        doc_id = str(raw.get("doc_id", f"{path.stem}:{lineno}"))
        docs.append((doc_id, [str(t) for t in raw["tokens"]]))
    return docs


def _open_out(path, mode: str):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def _load_model(name_or_path: str):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(name_or_path, use_fast=True)
    model = AutoModel.from_pretrained(name_or_path)
    return model, tokenizer


def export(job: ExportJob, model=None, tokenizer=None) -> ExportReport:
    """Write one store record per corpus document; returns the sidecar report.

    ``model`` and ``tokenizer`` may be passed directly (any HF-style pair);
    otherwise both are loaded from ``job.model``.
    """
    if (model is None) != (tokenizer is None):
        raise ExportError("pass both model and tokenizer, or neither")
    if model is None:
        model, tokenizer = _load_model(job.model)
    model.eval()

    docs = read_corpus(job.corpus)
    dim = model.config.hidden_size
    max_len = model.config.max_position_embeddings
    report = ExportReport(dim=dim)

    with _open_out(job.out, "w") as out:
        out.write(json.dumps({"format_version": STORE_FORMAT_VERSION, "dim": dim}) + "\n")
        for start in range(0, len(docs), job.batch_size):
            batch = docs[start:start + job.batch_size]
            encoding = tokenizer(
                [tokens for _, tokens in batch],
                is_split_into_words=True,
                padding=True,
                truncation=True,
                max_length=max_len,
                return_tensors="pt",
            )
            with torch.no_grad():
                hidden = model(**encoding).last_hidden_state
            for i, (doc_id, tokens) in enumerate(batch):
                word_ids = encoding.word_ids(batch_index=i)
                positions = [p for p, w in enumerate(word_ids) if w is not None]
                pieces = tokenizer.convert_ids_to_tokens(
                    [int(encoding["input_ids"][i][p]) for p in positions])
                word_index = [word_ids[p] for p in positions]
                if set(word_index) != set(range(len(tokens))):
                    report.truncated += 1
                report.normalization_mismatches += _normalization_mismatches(
                    tokens, pieces, word_index)
                vectors = [hidden[i, p].tolist() for p in positions]
                out.write(json.dumps({
                    "doc_id": doc_id,
                    "pieces": pieces,
                    "word_index": word_index,
                    "vectors": vectors,
                }) + "\n")
                report.documents += 1

    report.report_path = str(Path(str(job.out)) .with_name(
        Path(str(job.out)).name + ".report.json"))
    Path(report.report_path).write_text(json.dumps(report.as_dict(), indent=2))
    return report


def _normalization_mismatches(tokens, pieces, word_index) -> int:
    """Count words whose pieces, '##' stripped and concatenated, differ from
    the source token (the tokenizer may normalize case, accents, or unknowns)."""
    rebuilt: dict[int, str] = {}
    for piece, w in zip(pieces, word_index):
        rebuilt[w] = rebuilt.get(w, "") + (piece[2:] if piece.startswith("##") else piece)
    return sum(1 for w, text in rebuilt.items() if text != tokens[w])


def export_word_vectors(corpus, static_vectors, out) -> tuple[int, int]:
    """Write a GloVe-style text file for the corpus vocabulary.

    ``static_vectors`` maps token -> vector. Tokens missing from the source
    are omitted. Returns (written, missing) counts.
    """
    seen: list[str] = []
    for _, tokens in read_corpus(corpus):
        for tok in tokens:
            if tok not in seen:
                seen.append(tok)
    written = missing = 0
    with open(out, "w", encoding="utf-8") as f:
        for tok in seen:
            vec = static_vectors.get(tok)
            if vec is None:
                missing += 1
                continue
            f.write(tok + " " + " ".join(repr(float(x)) for x in vec) + "\n")
            written += 1
    return written, missing
