"""Strict accuracy, loose macro F1, and loose micro F1.

Units are (gold label set, predicted label set) pairs. In entity-level
mode every gold set is nonempty; in all-token mode filler tokens carry
empty gold sets, and an empty prediction on an empty gold set counts as
a correct unit (which is why strict accuracy is misleadingly high on
mostly-non-entity corpora).
"""

from __future__ import annotations

from dataclasses import dataclass

from .dataset import Document, LabelVocab
from .errors import EvaluationError


@dataclass(frozen=True)
class EvalUnit:
    gold: frozenset[int]
    pred: frozenset[int]
    unit_id: tuple = ()


@dataclass
class MetricReport:
    strict_acc: float
    macro_p: float
    macro_r: float
    macro_f1: float
    micro_p: float
    micro_r: float
    micro_f1: float
    unit_count: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)

    def table(self, title: str = "") -> str:
        head = f"{title}\n" if title else ""
        return (
            head
            + f"{'Acc':>8} {'Ma-F1':>8} {'Mi-F1':>8}\n"
            + f"{self.strict_acc:8.3f} {self.macro_f1:8.3f} {self.micro_f1:8.3f}"
        )


def _require_units(units):
    if not units:
        raise EvaluationError("cannot evaluate an empty unit list")


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def strict_accuracy(units) -> float:
    _require_units(units)
    return sum(1 for u in units if u.pred == u.gold) / len(units)


def loose_macro(units) -> tuple[float, float, float]:
    """Per-unit P/R averaged across units.

    Conventions: an empty prediction against nonempty gold scores P=0;
    empty against empty scores P=R=1; a nonempty prediction against empty
    gold scores 0 both ways.
    """
    _require_units(units)
    p_sum = r_sum = 0.0
    for u in units:
        hit = len(u.gold & u.pred)
        if u.pred:
            p_sum += hit / len(u.pred)
        elif not u.gold:
            p_sum += 1.0
        if u.gold:
            r_sum += hit / len(u.gold)
        elif not u.pred:
            r_sum += 1.0
    p = p_sum / len(units)
    r = r_sum / len(units)
    return p, r, _f1(p, r)


def loose_micro(units) -> tuple[float, float, float]:
    """Corpus-level P/R from summed intersection / prediction / gold counts."""
    _require_units(units)
    hit = sum(len(u.gold & u.pred) for u in units)
    n_pred = sum(len(u.pred) for u in units)
    n_gold = sum(len(u.gold) for u in units)
    p = hit / n_pred if n_pred else 0.0
    r = hit / n_gold if n_gold else 0.0
    return p, r, _f1(p, r)


def report(units) -> MetricReport:
    ma_p, ma_r, ma_f1 = loose_macro(units)
    mi_p, mi_r, mi_f1 = loose_micro(units)
    return MetricReport(
        strict_acc=strict_accuracy(units),
        macro_p=ma_p, macro_r=ma_r, macro_f1=ma_f1,
        micro_p=mi_p, micro_r=mi_r, micro_f1=mi_f1,
        unit_count=len(units),
    )


def evaluate_e2e_as_mention_level(token_preds: dict[str, list[set[int]]],
                                  documents: list[Document],
                                  vocab: LabelVocab) -> MetricReport:
    """Score a token tagger against gold mentions.

    One unit per gold mention; its prediction is the union of the
    predicted label sets over the mention's tokens. Spurious predictions
    on non-entity tokens are ignored entirely.
    """
    units = []
    for doc in documents:
        per_token = token_preds.get(doc.doc_id, [set()] * len(doc.tokens))
        for mi, m in enumerate(doc.mentions):
            pred: set[int] = set()
            for t in range(m.start, m.end):
                if t < len(per_token):
                    pred |= per_token[t]
            units.append(EvalUnit(
                gold=frozenset(vocab.gold_indices(m.labels)),
                pred=frozenset(pred),
                unit_id=(doc.doc_id, mi),
            ))
    return report(units)
