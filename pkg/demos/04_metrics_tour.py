#!/usr/bin/env python3
"""How the three evaluation metrics disagree, and why that matters.

Strict accuracy demands exact set equality per unit; loose macro averages
per-unit precision/recall; loose micro pools true positives globally. On a
corpus where most tokens carry no label, a predictor that outputs nothing
looks excellent under strict accuracy and scores zero under micro-F1."""

from finetype.metrics import EvalUnit, report

# -- the worked two-unit example ----------------------------------------------------

units = [
    EvalUnit(gold=frozenset({0, 1}), pred=frozenset({0}), unit_id="u0"),
    EvalUnit(gold=frozenset({2}), pred=frozenset({2, 3}), unit_id="u1"),
]
rep = report(units)
print(rep.table(title="worked example (macro-F1 = 3/4, micro-F1 = 2/3)"))
print()

# -- the misleading-metric construction ----------------------------------------------

# 12 tokens per sentence, exactly one labeled: an all-empty predictor matches
# gold on 11 of 12 tokens, so strict accuracy lands above 0.9.
sparse_units = []
for s in range(30):
    for t in range(12):
        gold = frozenset({0}) if t == 11 else frozenset()
        sparse_units.append(EvalUnit(gold=gold, pred=frozenset(), unit_id=(s, t)))

rep = report(sparse_units)
print(rep.table(title="all-empty predictor on a sparse-entity corpus"))
print()
print(f"strict accuracy {rep.strict_acc:.3f} vs micro-F1 {rep.micro_f1:.3f}: "
      "report both, trust neither alone.")
