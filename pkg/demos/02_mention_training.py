#!/usr/bin/env python3
"""Train the mention-level context model on a small synthetic corpus.

Each sentence carries one mention whose label is determined by the entity
word, so a model that reads the mention span can reach perfect strict
accuracy. We compare the three attention variants on the same data."""

import tempfile
from pathlib import Path

import numpy as np

from finetype.dataset import Document, Mention
from finetype.tokenize_embed import WordVectorProvider
from finetype.training import TrainConfig, evaluate_model, load_model, train

# -- corpus: "the entityK was seen today", label /typeK ---------------------------

docs = []
for i in range(40):
    k = i % 4
    docs.append(Document(
        doc_id=f"m{i}",
        tokens=("the", f"entity{k}", "was", "seen", "today"),
        mentions=(Mention(1, 2, frozenset({f"/type{k}"})),),
    ))

# Strong block one-hot word vectors: each token owns 16 coordinates set to 8.0.
tokens = sorted({t for d in docs for t in d.tokens})
dim = 16 * len(tokens)
vectors = {}
for i, tok in enumerate(tokens):
    v = np.zeros(dim)
    v[16 * i:16 * (i + 1)] = 8.0
    vectors[tok] = v
provider = WordVectorProvider(vectors, dim)

workdir = Path(tempfile.mkdtemp(prefix="finetype-demo-"))

for attention in ("none", "scalar", "dynamic"):
    config = TrainConfig(
        model="mention", attention=attention, embedding="word_vectors",
        embedding_dim=dim, lr=0.0001, hidden=32, dropout=0.0,
        batch_size=10, seed=0, max_epochs=120, patience=10 ** 9,
    )
    ckpt = workdir / f"mention-{attention}.ckpt"
    record = train(config, docs, docs, provider, checkpoint_path=ckpt)
    model, vocab, _ = load_model(ckpt)
    rep = evaluate_model(model, docs, provider, vocab, "entity_level", config)
    print(f"attention={attention:8s} best epoch {record.best_epoch:3d} "
          f"strict {rep.strict_acc:.3f} micro-F1 {rep.micro_f1:.3f}")

print(f"checkpoints in {workdir}")
