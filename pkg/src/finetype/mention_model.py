"""Mention-level typing model: attention over three context vectors,
two feed-forward layers, sigmoid scores, and thresholded prediction with
an argmax fallback (every mention carries at least one gold label, so an
empty prediction is never allowed).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DimensionError, StateError
from .nn import ParamStore, bce_loss, dropout_forward, glorot_uniform, linear_forward

ATTENTION_KINDS = ("none", "scalar", "dynamic")


class MentionModel:
    """Owns a ParamStore with W1/b1/W2/b2 plus optional attention params."""

    def __init__(self, dim: int, hidden: int, n_labels: int,
                 attention: str = "none", dropout: float = 0.5, seed: int = 0):
        if attention not in ATTENTION_KINDS:
            raise ConfigError(f"attention must be one of {ATTENTION_KINDS}, got {attention!r}")
        self.dim = dim
        self.hidden = hidden
        self.n_labels = n_labels
        self.attention = attention
        self.dropout = dropout
        self.store = ParamStore()
        rng = np.random.Generator(np.random.PCG64(seed))
        if attention == "scalar":
            self.att = self.store.register("att.scalars", np.zeros(3))
        elif attention == "dynamic":
            self.W_att = self.store.register("att.W", glorot_uniform((dim, 3), rng))
            self.b_att = self.store.register("att.b", np.zeros(3))
        self.W1 = self.store.register("ff.W1", glorot_uniform((3 * dim, hidden), rng))
        self.b1 = self.store.register("ff.b1", np.zeros(hidden))
        self.W2 = self.store.register("out.W2", glorot_uniform((hidden, n_labels), rng))
        self.b2 = self.store.register("out.b2", np.zeros(n_labels))

    # -- attention ------------------------------------------------------------

    def attention_weights(self, c_l: Tensor, c_r: Tensor, c_m: Tensor) -> Tensor:
        """Softmaxed (a_l, a_r, a_m).

        Scalar attention is mention-independent (shape (3,)); dynamic
        attention is a function of the averaged mention embedding only
        (shape (B, 3)).
        """
        if self.attention == "scalar":
            return ad.softmax_lastdim(self.att)
        if self.attention == "dynamic":
            return ad.softmax_lastdim(linear_forward(c_m, self.W_att, self.b_att))
        raise StateError("attention_weights called on a model with attention='none'")

    # -- forward --------------------------------------------------------------

    def forward(self, c_l: Tensor, c_r: Tensor, c_m: Tensor, mode: str = "eval",
                rng: np.random.Generator | None = None) -> Tensor:
        """Batched forward: three (B, d) context blocks -> (B, N) sigmoid scores."""
        if c_l.data.shape[-1] != self.dim:
            raise DimensionError(
                f"context dim {c_l.data.shape[-1]} != model dim {self.dim}"
            )
        if self.attention == "none":
            parts = (c_l, c_r, c_m)
        else:
            a = self.attention_weights(c_l, c_r, c_m)
            if self.attention == "scalar":
                parts = (ad.mul(a[0], c_l), ad.mul(a[1], c_r), ad.mul(a[2], c_m))
            else:
                parts = (
                    ad.mul(a[:, 0:1], c_l),
                    ad.mul(a[:, 1:2], c_r),
                    ad.mul(a[:, 2:3], c_m),
                )
        c_c = ad.concat(parts, axis=-1)
        h = ad.relu(linear_forward(c_c, self.W1, self.b1))
        if mode == "train" and rng is None:
            raise ConfigError("train-mode forward requires an rng for dropout")
        h, _ = dropout_forward(h, self.dropout, mode, rng)
        return ad.sigmoid(linear_forward(h, self.W2, self.b2))

    def forward_triples(self, triples, mode: str = "eval",
                        rng: np.random.Generator | None = None) -> Tensor:
        c_l = Tensor(np.stack([t.c_l for t in triples]))
        c_r = Tensor(np.stack([t.c_r for t in triples]))
        c_m = Tensor(np.stack([t.c_m for t in triples]))
        return self.forward(c_l, c_r, c_m, mode=mode, rng=rng)

    # -- loss / prediction ------------------------------------------------------

    def loss(self, scores: Tensor, targets: np.ndarray) -> Tensor:
        """Per-example BCE averaged over labels, then averaged over the batch."""
        return bce_loss(scores, targets)

    def meta(self) -> dict:
        return {
            "model": "mention",
            "attention": self.attention,
            "dim": self.dim,
            "hidden": self.hidden,
            "n_labels": self.n_labels,
            "dropout": self.dropout,
        }

    @classmethod
    def from_meta(cls, meta: dict, seed: int = 0) -> "MentionModel":
        return cls(
            dim=meta["dim"], hidden=meta["hidden"], n_labels=meta["n_labels"],
            attention=meta["attention"], dropout=meta.get("dropout", 0.5), seed=seed,
        )


def mention_predict(scores: np.ndarray) -> set[int]:
    """Threshold at > 0.5; if nothing clears it, fall back to the argmax
    (ties broken toward the lowest index)."""
    scores = np.asarray(scores)
    chosen = {int(i) for i in np.flatnonzero(scores > 0.5)}
    if not chosen:
        chosen = {int(np.argmax(scores))}
    return chosen
