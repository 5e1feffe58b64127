"""End-to-end tagger: Bi-GRU over the wordpiece sequence, per-wordpiece
multi-label sigmoid heads, loss over non-pad wordpieces, and a
wordpiece-to-word layer that averages predicted scores within each word.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DataError, DimensionError
from .nn import (
    GruCellParams,
    ParamStore,
    bce_loss,
    bigru_forward,
    dropout_forward,
    glorot_uniform,
    linear_forward,
)


class E2EModel:
    """Forward/backward Bi-GRU plus a (2H -> N) linear head."""

    def __init__(self, dim: int, hidden: int, n_labels: int,
                 dropout: float = 0.5, seed: int = 0):
        self.dim = dim
        self.hidden = hidden
        self.n_labels = n_labels
        self.dropout = dropout
        self.store = ParamStore()
        rng = np.random.Generator(np.random.PCG64(seed))
        self.fwd = GruCellParams.create(self.store, "gru.fwd", dim, hidden, rng)
        self.bwd = GruCellParams.create(self.store, "gru.bwd", dim, hidden, rng)
        self.W_out = self.store.register("out.W", glorot_uniform((2 * hidden, n_labels), rng))
        self.b_out = self.store.register("out.b", np.zeros(n_labels))

    def forward(self, emb: Tensor, mode: str = "eval",
                rng: np.random.Generator | None = None,
                pad_mask: np.ndarray | None = None) -> Tensor:
        """emb[T, B, d] -> sigmoid scores [T, B, N].

        Pad positions still produce score rows; callers mask them out of
        the loss and never read them at prediction time.
        """
        if emb.data.ndim != 3 or emb.data.shape[-1] != self.dim:
            raise DimensionError(
                f"e2e forward expects [T,B,{self.dim}], got {emb.data.shape}"
            )
        h = bigru_forward(emb, self.fwd, self.bwd, pad_mask=pad_mask)
        if mode == "train" and rng is None:
            raise ConfigError("train-mode forward requires an rng for dropout")
        h, _ = dropout_forward(h, self.dropout, mode, rng)
        T, B, _ = h.data.shape
        flat = ad.reshape(h, (T * B, 2 * self.hidden))
        logits = linear_forward(flat, self.W_out, self.b_out)
        return ad.reshape(ad.sigmoid(logits), (T, B, self.n_labels))

    def loss(self, scores: Tensor, targets: np.ndarray,
             pad_mask: np.ndarray) -> Tensor:
        """BCE averaged over every non-pad wordpiece x label cell in the batch."""
        return bce_loss(scores, targets, mask=pad_mask)

    def meta(self) -> dict:
        return {
            "model": "e2e",
            "dim": self.dim,
            "hidden": self.hidden,
            "n_labels": self.n_labels,
            "dropout": self.dropout,
        }

    @classmethod
    def from_meta(cls, meta: dict, seed: int = 0) -> "E2EModel":
        return cls(dim=meta["dim"], hidden=meta["hidden"], n_labels=meta["n_labels"],
                   dropout=meta.get("dropout", 0.5), seed=seed)


def concat_layer(wordpiece_scores: np.ndarray, word_index) -> np.ndarray:
    """Average per-wordpiece sigmoid scores into one row per word.

    Operates on predictions (post-sigmoid), so single-piece words pass
    through unchanged and outputs stay in (0, 1).
    """
    word_index = list(word_index)
    if len(word_index) != wordpiece_scores.shape[0]:
        raise DimensionError(
            f"{wordpiece_scores.shape[0]} score rows vs {len(word_index)} word indices"
        )
    if not word_index:
        return np.zeros((0, wordpiece_scores.shape[1]))
    n_words = max(word_index) + 1
    out = np.zeros((n_words, wordpiece_scores.shape[1]))
    counts = np.zeros(n_words)
    for row, w in zip(wordpiece_scores, word_index):
        out[w] += row
        counts[w] += 1
    if (counts == 0).any():
        raise DataError("word with zero wordpieces in concat layer")
    return out / counts[:, None]


def e2e_predict(word_scores: np.ndarray) -> list[set[int]]:
    """Per-token threshold at > 0.5; empty sets are allowed (no fallback)."""
    return [{int(i) for i in np.flatnonzero(row > 0.5)} for row in np.asarray(word_scores)]
