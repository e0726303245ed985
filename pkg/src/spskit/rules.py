"""Syntactic-rule extraction, empirical distributions, and the JS instance distance.

A syntactic rule is a one-level production: a parent label plus the ordered
labels of its children.  Lexical productions (a POS tag over its token) are
excluded by default, so a rule exists for every internal node that has at
least one non-leaf child.  The selection machinery measures how well a
candidate fits a reference corpus as JS(S, S + {c}): the Jensen-Shannon
divergence, in base 2, between the reference distribution and the same
distribution with the candidate's feature counts folded in.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyFeaturesError
from .treebank import ParseTree, Sentence

__all__ = [
    "SyntacticRule",
    "RuleDistribution",
    "extract_rules",
    "extract_corpus_rules",
    "token_counts",
    "js_divergence",
    "instance_distance",
    "format_rule",
    "export_rules",
]

# Marker standing in for a bare token child (one not wrapped in a POS node).
TOKEN_MARKER = "<tok>"


@dataclass(frozen=True, order=True)
class SyntacticRule:
    parent: str
    children: tuple

    def __post_init__(self):
        if not self.children:
            raise ValueError("rule must have at least one child label")


def format_rule(rule):
    return f"{rule.parent} -> " + " ".join(rule.children)


def extract_rules(tree, exclude_labels=()):
    """Count the syntactic rules of one tree.

    One rule per internal node with at least one non-leaf child; preterminal
    (lexical) productions contribute nothing.  A child node contributes its
    label, a bare token child contributes TOKEN_MARKER.  Children whose label
    is in ``exclude_labels`` (e.g. punctuation ``w``) are omitted; a rule whose
    children are all omitted is dropped.
    """
    exclude = frozenset(exclude_labels)
    counts = Counter()
    for node in tree.subtrees():
        if node.is_preterminal:
            continue
        children = []
        for child in node.children:
            label = TOKEN_MARKER if isinstance(child, str) else child.label
            if label not in exclude:
                children.append(label)
        if children:
            counts[SyntacticRule(node.label, tuple(children))] += 1
    return counts


def extract_corpus_rules(trees, exclude_labels=()):
    """Aggregate rule counts over a corpus."""
    counts = Counter()
    for tree in trees:
        counts.update(extract_rules(tree, exclude_labels=exclude_labels))
    return counts


def token_counts(item):
    """Token counts of a Sentence, a ParseTree, or an iterable of either."""
    if isinstance(item, Sentence):
        return Counter(item.tokens)
    if isinstance(item, ParseTree):
        return Counter(item.leaves())
    counts = Counter()
    for element in item:
        counts.update(token_counts(element))
    return counts


class RuleDistribution:
    """An empirical probability distribution over hashable items.

    Built from counts, which are retained so a candidate's features can be
    folded in without losing the original totals.
    """

    def __init__(self, counts):
        counts = {item: int(c) for item, c in counts.items() if c > 0}
        if not counts:
            raise ValueError("distribution needs at least one observation")
        self._counts = counts
        self.total_count = sum(counts.values())

    @property
    def counts(self):
        return dict(self._counts)

    @property
    def support(self):
        total = self.total_count
        return {item: c / total for item, c in self._counts.items()}

    def probability(self, item):
        return self._counts.get(item, 0) / self.total_count

    def items(self):
        return self._counts.keys()

    def extended(self, extra_counts):
        """A new distribution with ``extra_counts`` folded into this one."""
        merged = Counter(self._counts)
        merged.update(extra_counts)
        return RuleDistribution(merged)

    def scaled(self, factor):
        """Counts multiplied by a positive integer; probabilities unchanged."""
        if factor < 1:
            raise ValueError("factor must be >= 1")
        return RuleDistribution({i: c * factor for i, c in self._counts.items()})

    def __len__(self):
        return len(self._counts)

    def __repr__(self):
        return (
            f"RuleDistribution({len(self._counts)} items, "
            f"total_count={self.total_count})"
        )


def js_divergence(p, q):
    """Jensen-Shannon divergence in base 2, bounded in [0, 1].

    JS(P, Q) = (KL(P||M) + KL(Q||M)) / 2 with M = (P + Q) / 2.  Disjoint
    supports are legal and give exactly 1; identical distributions give 0.
    The union support is accumulated in sorted order so equal distributions
    always produce bit-identical values, however their counts were built.
    """
    ps = p.support
    qs = q.support
    total = 0.0
    for item in sorted(ps.keys() | qs.keys()):
        pi = ps.get(item, 0.0)
        qi = qs.get(item, 0.0)
        m = 0.5 * (pi + qi)
        if pi > 0.0:
            total += 0.5 * pi * math.log2(pi / m)
        if qi > 0.0:
            total += 0.5 * qi * math.log2(qi / m)
    # Clip the float noise so the documented range holds exactly.
    return min(1.0, max(0.0, total))


def candidate_features(candidate, mode, exclude_labels=()):
    """Featurize a candidate for instance_distance.

    ``mode`` is "rules" (syntactic-rule counts of the candidate's tree) or
    "tokens" (token counts of its sentence).  Accepts a PseudoTree-shaped
    object (``.tree``/``.sentence``), a ParseTree, or a Sentence.
    """
    if mode == "rules":
        tree = getattr(candidate, "tree", candidate)
        if not isinstance(tree, ParseTree):
            raise TypeError(f"cannot extract rules from {type(candidate).__name__}")
        return extract_rules(tree, exclude_labels=exclude_labels)
    if mode == "tokens":
        sentence = getattr(candidate, "sentence", candidate)
        return token_counts(sentence)
    raise ValueError(f"unknown featurization mode {mode!r}")


def instance_distance(candidate, reference, mode="rules", exclude_labels=()):
    """D(c, S) = JS(S, S + {c}) under the requested featurization.

    ``reference`` is the empirical distribution of the reference corpus S;
    the candidate's feature counts are added to S's counts and the result is
    compared against S.  Lower means the candidate disturbs the reference
    distribution less.
    """
    features = candidate_features(candidate, mode, exclude_labels=exclude_labels)
    if not features:
        raise EmptyFeaturesError(
            f"candidate has no features under mode {mode!r}"
        )
    return js_divergence(reference, reference.extended(features))


def export_rules(counts, path=None):
    """Render rule counts as sorted text, one ``parent -> children`` per line.

    Returns the text; writes it to ``path`` when given.  Useful for prompt
    construction and diffing rule inventories.
    """
    lines = [format_rule(rule) for rule in sorted(counts)]
    text = "\n".join(lines) + ("\n" if lines else "")
    if path is not None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    return text
