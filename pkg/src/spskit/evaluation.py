"""Labeled bracketed-span precision/recall/F1 against gold trees.

Spans are (label, start, end) over token positions, micro-averaged across the
corpus in the evalb convention.  By default the root span and preterminal
(POS-level) spans are not counted; punctuation spans are counted unless their
labels are listed in ``exclude_labels``.  Scores are on a 0..100 scale.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .errors import TokenMismatchError

__all__ = ["ScoreOptions", "ScoreReport", "spans", "score_pair", "score_corpus"]


@dataclass(frozen=True)
class ScoreOptions:
    include_root: bool = False
    include_pos: bool = False
    exclude_labels: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "exclude_labels", frozenset(self.exclude_labels))


def spans(tree, opts=ScoreOptions()):
    """Multiset of counted (label, start, end) spans of one tree."""
    out = Counter()

    def walk(node, start, is_root):
        end = start
        for child in node.children:
            if isinstance(child, str):
                end += 1
            else:
                end = walk(child, end, False)
        counted = True
        if is_root and not opts.include_root:
            counted = False
        if node.is_preterminal and not opts.include_pos:
            counted = False
        if node.label in opts.exclude_labels:
            counted = False
        if counted:
            out[(node.label, start, end)] += 1
        return end

    walk(tree, 0, True)
    return out


def score_pair(pred, gold, opts=ScoreOptions()):
    """(matched, predicted, gold) span counts for one tree pair."""
    if pred.leaves() != gold.leaves():
        raise TokenMismatchError(
            f"token sequences differ: {pred.leaves()!r} vs {gold.leaves()!r}"
        )
    pred_spans = spans(pred, opts)
    gold_spans = spans(gold, opts)
    matched = sum((pred_spans & gold_spans).values())
    return matched, sum(pred_spans.values()), sum(gold_spans.values())


def _prf(matched, predicted, gold):
    precision = 100.0 * matched / predicted if predicted else 0.0
    recall = 100.0 * matched / gold if gold else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


@dataclass
class ScoreReport:
    precision: float
    recall: float
    f1: float
    matched: int
    predicted: int
    gold: int
    per_label: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "matched": self.matched,
            "predicted": self.predicted,
            "gold": self.gold,
            "per_label": {
                label: {"precision": p, "recall": r, "f1": f}
                for label, (p, r, f) in sorted(self.per_label.items())
            },
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
            f.write("\n")

    def table(self):
        lines = [
            f"{'label':<12} {'P':>7} {'R':>7} {'F1':>7}",
            f"{'ALL':<12} {self.precision:7.2f} {self.recall:7.2f} {self.f1:7.2f}",
        ]
        for label, (p, r, f) in sorted(self.per_label.items()):
            lines.append(f"{label:<12} {p:7.2f} {r:7.2f} {f:7.2f}")
        return "\n".join(lines)


def score_corpus(preds, golds, opts=ScoreOptions()):
    """Micro-averaged report over aligned prediction/gold corpora."""
    preds = list(preds)
    golds = list(golds)
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} vs {len(golds)}")
    if not preds:
        raise ValueError("cannot score an empty corpus")

    matched = predicted = gold_total = 0
    by_label = {}
    for index, (pred, gold) in enumerate(zip(preds, golds)):
        if pred.leaves() != gold.leaves():
            raise TokenMismatchError(f"pair {index}: token sequences differ")
        pred_spans = spans(pred, opts)
        gold_spans = spans(gold, opts)
        hit = pred_spans & gold_spans
        matched += sum(hit.values())
        predicted += sum(pred_spans.values())
        gold_total += sum(gold_spans.values())
        for (label, _, _), c in pred_spans.items():
            m, p, g = by_label.get(label, (0, 0, 0))
            by_label[label] = (m, p + c, g)
        for (label, _, _), c in gold_spans.items():
            m, p, g = by_label.get(label, (0, 0, 0))
            by_label[label] = (m, p, g + c)
        for (label, _, _), c in hit.items():
            m, p, g = by_label[label]
            by_label[label] = (m + c, p, g)

    precision, recall, f1 = _prf(matched, predicted, gold_total)
    per_label = {label: _prf(m, p, g) for label, (m, p, g) in by_label.items()}
    return ScoreReport(
        precision=precision,
        recall=recall,
        f1=f1,
        matched=matched,
        predicted=predicted,
        gold=gold_total,
        per_label=per_label,
    )
