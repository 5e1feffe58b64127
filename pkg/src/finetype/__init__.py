"""Fine-grained entity typing: mention-level context models and an
end-to-end Bi-GRU tagger over frozen, pluggable embeddings."""

from .autodiff import Tensor
from .dataset import Document, LabelVocab, Mention, load_corpus, make_modified_split
from .e2e_model import E2EModel, concat_layer, e2e_predict
from .mention_model import MentionModel, mention_predict
from .metrics import EvalUnit, MetricReport, loose_macro, loose_micro, strict_accuracy
from .nn import ParamStore, grad_check
from .tokenize_embed import (
    ContextualStoreProvider,
    UniformProvider,
    WordVectorProvider,
    build_context_triple,
    load_word_vectors,
    wordpiece_tokenize,
)
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "Tensor", "ParamStore", "grad_check",
    "Document", "Mention", "LabelVocab", "load_corpus", "make_modified_split",
    "MentionModel", "mention_predict", "E2EModel", "concat_layer", "e2e_predict",
    "EvalUnit", "MetricReport", "strict_accuracy", "loose_macro", "loose_micro",
    "UniformProvider", "WordVectorProvider", "ContextualStoreProvider",
    "wordpiece_tokenize", "build_context_triple", "load_word_vectors",
    "TrainConfig", "train",
]
