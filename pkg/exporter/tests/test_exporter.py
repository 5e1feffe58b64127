"""Exporter contract tests, run against a tiny locally-built BERT.

No pretrained weights are downloaded: a random-weight BertModel with a
hand-written wordpiece vocabulary exercises the full export path, and the
primary package's store loader verifies the cross-component interface.
"""

import json
import math
from pathlib import Path

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

from ft_exporter import ExportJob, export, export_word_vectors
from ft_exporter.export import ExportError, read_corpus

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "bass", "was", "there", "played",
    "entity", "##0", "##1", "swim", "##ming",
]


@pytest.fixture(scope="module")
def tiny_bert(tmp_path_factory):
    vocab_file = tmp_path_factory.mktemp("vocab") / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n")
    tokenizer = BertTokenizerFast(vocab=str(vocab_file), do_lower_case=False)
    config = BertConfig(
        vocab_size=len(VOCAB), hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64,
        max_position_embeddings=12,
    )
    torch.manual_seed(0)
    model = BertModel(config)
    return model, tokenizer


def write_corpus(path, sentences):
    with open(path, "w", encoding="utf-8") as f:
        for i, tokens in enumerate(sentences):
            f.write(json.dumps({"doc_id": f"d{i}", "tokens": tokens,
                                "mentions": []}) + "\n")


def read_store(path):
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    return header, [json.loads(line) for line in lines[1:] if line.strip()]


def test_three_sentence_fixture_shapes(tmp_path, tiny_bert):
    model, tokenizer = tiny_bert
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, [
        ["the", "bass", "was", "there"],
        ["entity0", "played"],
        ["swimming"],
    ])
    out = tmp_path / "store.jsonl"
    job = ExportJob(corpus=str(corpus), model="local", out=str(out), batch_size=2)
    report = export(job, model=model, tokenizer=tokenizer)

    header, records = read_store(out)
    assert header == {"format_version": 1, "dim": 32}
    assert report.documents == len(records) == 3
    for rec in records:
        assert len(rec["pieces"]) == len(rec["vectors"]) == len(rec["word_index"])
        assert all(len(v) == 32 for v in rec["vectors"])
        assert "[CLS]" not in rec["pieces"] and "[SEP]" not in rec["pieces"]
    # multi-piece words keep their word_index grouping
    assert records[1]["pieces"] == ["entity", "##0", "played"]
    assert records[1]["word_index"] == [0, 0, 1]


def test_polysemous_occurrences_get_distinct_vectors(tmp_path, tiny_bert):
    model, tokenizer = tiny_bert
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, [["the", "bass", "played", "the", "bass"]])
    out = tmp_path / "store.jsonl"
    export(ExportJob(corpus=str(corpus), model="local", out=str(out)),
           model=model, tokenizer=tokenizer)
    _, [rec] = read_store(out)
    first, second = (rec["vectors"][i] for i, p in enumerate(rec["pieces"])
                     if p == "bass")
    dot = sum(a * b for a, b in zip(first, second))
    cosine = dot / (math.hypot(*first) * math.hypot(*second))
    assert cosine < 1.0 - 1e-6


def test_export_is_deterministic(tmp_path, tiny_bert):
    model, tokenizer = tiny_bert
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, [["the", "bass", "was", "there"], ["entity1"]])
    stores = []
    for run in range(2):
        out = tmp_path / f"store{run}.jsonl"
        export(ExportJob(corpus=str(corpus), model="local", out=str(out)),
               model=model, tokenizer=tokenizer)
        stores.append(read_store(out))
    (_, recs_a), (_, recs_b) = stores
    for ra, rb in zip(recs_a, recs_b):
        assert ra["pieces"] == rb["pieces"]
        for va, vb in zip(ra["vectors"], rb["vectors"]):
            assert all(abs(a - b) < 1e-6 for a, b in zip(va, vb))


def test_overlong_sentence_truncates_and_reports(tmp_path, tiny_bert):
    model, tokenizer = tiny_bert
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, [["the"] * 30, ["bass"]])
    out = tmp_path / "store.jsonl"
    report = export(ExportJob(corpus=str(corpus), model="local", out=str(out)),
                    model=model, tokenizer=tokenizer)
    assert report.truncated == 1
    sidecar = json.loads(Path(report.report_path).read_text())
    assert sidecar["truncated"] == 1
    _, records = read_store(out)
    # truncated record still satisfies the shape contract
    assert len(records[0]["pieces"]) == len(records[0]["vectors"]) <= 10


def test_unknown_words_counted_as_normalization_mismatch(tmp_path, tiny_bert):
    model, tokenizer = tiny_bert
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, [["the", "zzz"]])
    out = tmp_path / "store.jsonl"
    report = export(ExportJob(corpus=str(corpus), model="local", out=str(out)),
                    model=model, tokenizer=tokenizer)
    assert report.normalization_mismatches == 1
    _, [rec] = read_store(out)
    assert rec["pieces"] == ["the", "[UNK]"]


def test_gzip_output(tmp_path, tiny_bert):
    model, tokenizer = tiny_bert
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, [["the", "bass"]])
    out = tmp_path / "store.jsonl.gz"
    export(ExportJob(corpus=str(corpus), model="local", out=str(out)),
           model=model, tokenizer=tokenizer)
    import gzip
    with gzip.open(out, "rt", encoding="utf-8") as f:
        assert json.loads(f.readline())["dim"] == 32


def test_job_validation():
    with pytest.raises(ExportError):
        ExportJob(corpus="c", model="m", out="o", batch_size=0)
    with pytest.raises(ExportError):
        ExportJob(corpus="c", model="m", out="o", layer="pooled")


def test_read_corpus_rejects_missing_tokens(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"doc_id": "x"}\n')
    with pytest.raises(ExportError, match="line 1"):
        read_corpus(bad)


# -- word-vector export ---------------------------------------------------------


def test_word_vectors_all_present(tmp_path):
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, [["a", "b", "c"], ["d", "e", "a"]])
    source = {t: [float(i), float(i) + 0.5] for i, t in enumerate("abcde")}
    out = tmp_path / "vecs.txt"
    written, missing = export_word_vectors(corpus, source, out)
    assert (written, missing) == (5, 0)
    assert len(out.read_text().splitlines()) == 5


def test_word_vectors_oov_omitted_and_counted(tmp_path):
    corpus = tmp_path / "c.jsonl"
    write_corpus(corpus, [["a", "b", "c", "d", "e"]])
    source = {t: [1.0] for t in "abde"}
    out = tmp_path / "vecs.txt"
    written, missing = export_word_vectors(corpus, source, out)
    assert (written, missing) == (4, 1)


# -- cross-component acceptance ---------------------------------------------------


def test_primary_component_loads_exported_store(tmp_path, tiny_bert):
    from finetype.tokenize_embed import ContextualStoreProvider, load_word_vectors
    from finetype.dataset import load_corpus

    model, tokenizer = tiny_bert
    corpus = tmp_path / "c.jsonl"
    sentences = [["the", "bass", "was", "there"], ["entity0", "played"]]
    write_corpus(corpus, sentences)
    out = tmp_path / "store.jsonl"
    export(ExportJob(corpus=str(corpus), model="local", out=str(out)),
           model=model, tokenizer=tokenizer)

    provider = ContextualStoreProvider.load(out)
    assert provider.dim == 32
    for doc in load_corpus(corpus):
        seq, emb = provider.embed(doc)
        assert emb.shape == (len(seq.pieces), 32)
        # segmentation round-trips: strip '##', concatenate, recover each word
        rebuilt = {}
        for piece, w in zip(seq.pieces, seq.word_index):
            rebuilt[w] = rebuilt.get(w, "") + piece.removeprefix("##")
        assert [rebuilt[i] for i in range(len(doc.tokens))] == list(doc.tokens)

    vec_out = tmp_path / "vecs.txt"
    source = {t: [0.25 * i, -1.0] for i, t in
              enumerate(sorted({t for s in sentences for t in s}))}
    export_word_vectors(corpus, source, vec_out)
    loaded = load_word_vectors(vec_out)
    for tok, vec in source.items():
        _, emb = loaded.embed(type("D", (), {"tokens": (tok,)})())
        assert list(emb[0]) == vec
