"""Trainable PCFG-CKY parsing backend with confidence scores.

Training builds a maximum-likelihood grammar from trees in standard form
(every token alone under a preterminal).  Productions with three or more
children are right-binarized with reversible "|<...>" intermediate labels;
unary productions are kept as-is and handled by a Viterbi unary-closure step
in the chart, so grammar families stay compact.  Smoothing adds ``alpha`` to
each observed shape's relative frequency before renormalizing, which keeps
the model invariant under count-proportional duplication of the treebank.
Within each preterminal's family, tokens seen no more than ``unk_threshold``
times fold into an UNK class, and every preterminal keeps an UNK slot, so a
word frequent under one tag is still reachable under every other tag.

Parsing returns the Viterbi tree with a length-normalized confidence,
``exp(logprob / n_tokens)``, in (0, 1]; a sentence outside the grammar's
coverage gets a designated flat fallback tree with confidence 0.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import ModelFormatError
from .rules import SyntacticRule
from .treebank import ParseTree, Sentence, validate_tree

__all__ = [
    "TrainConfig",
    "ParserModel",
    "PseudoTree",
    "PcfgBackend",
    "train",
    "parse",
    "parse_pool",
]

UNK = "<unk>"
BIN_OPEN = "|<"
BIN_CLOSE = ">"
RESERVED = ("|", "<", ">")

MODEL_VERSION = 1
PROB_TOL = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.01
    unk_threshold: int = 1
    seed: int = 0


@dataclass(frozen=True)
class PseudoTree:
    """A candidate sentence with its predicted tree and parser confidence."""

    sentence: Sentence
    tree: ParseTree
    confidence: float

    def __post_init__(self):
        if tuple(self.tree.leaves()) != self.sentence.tokens:
            raise ValueError("tree leaves do not match the sentence tokens")
        if not math.isfinite(self.confidence) or not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence!r} outside [0, 1]")


@dataclass
class ParserModel:
    roots: dict                 # label -> probability
    rules: dict                 # SyntacticRule (unary or binary) -> probability
    lexical: dict               # (preterminal label, token class) -> probability
    unk_threshold: int
    alpha: float
    inventory: object = None
    fallback_root: str = ""
    fallback_pos: str = ""
    _by_children: dict = field(default_factory=dict, repr=False)
    _by_unary_child: dict = field(default_factory=dict, repr=False)
    _exact: dict = field(default_factory=dict, repr=False)
    _unk: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.reindex()

    def reindex(self):
        by_children = {}
        by_unary_child = {}
        for rule, prob in self.rules.items():
            if len(rule.children) == 1:
                by_unary_child.setdefault(rule.children[0], []).append(
                    (rule.parent, math.log(prob))
                )
            else:
                by_children.setdefault(rule.children, []).append(
                    (rule.parent, math.log(prob))
                )
        for options in by_children.values():
            options.sort()
        for options in by_unary_child.values():
            options.sort()
        self._by_children = by_children
        self._by_unary_child = by_unary_child

        exact = {}
        unk = []
        for (label, cls), prob in self.lexical.items():
            if cls == UNK:
                unk.append((label, math.log(prob)))
            else:
                exact.setdefault(cls, []).append((label, math.log(prob)))
        for options in exact.values():
            options.sort()
        unk.sort()
        self._exact = exact
        self._unk = unk

    def lexical_options(self, token):
        """(preterminal, logprob) choices for one token.

        Tags that saw the token often enough use its own class; every other
        tag stays reachable through its UNK slot.
        """
        options = list(self._exact.get(token, ()))
        covered = {label for label, _ in options}
        options.extend(
            (label, logp) for label, logp in self._unk if label not in covered
        )
        return options

    def validate(self):
        """Check probability invariants; raises ModelFormatError on failure.

        Rule families and lexical families are separate conditional tables
        (the label inventory keeps constituent and POS labels disjoint).
        """
        families = {}
        for rule, prob in self.rules.items():
            families.setdefault(("rule", rule.parent), []).append(prob)
        for (label, _), prob in self.lexical.items():
            families.setdefault(("lex", label), []).append(prob)
        families[("root", "")] = list(self.roots.values())
        for family, probs in families.items():
            if any(p <= 0.0 for p in probs):
                raise ModelFormatError(f"family {family!r} has a prob <= 0")
            if abs(sum(probs) - 1.0) > PROB_TOL:
                raise ModelFormatError(
                    f"family {family!r} sums to {sum(probs)!r}, not 1"
                )

    def save(self, path):
        data = {
            "version": MODEL_VERSION,
            "alpha": self.alpha,
            "unk_threshold": self.unk_threshold,
            "fallback_root": self.fallback_root,
            "fallback_pos": self.fallback_pos,
            "roots": dict(sorted(self.roots.items())),
            "rules": [
                [r.parent, list(r.children), p] for r, p in sorted(self.rules.items())
            ],
            "lexical": [
                [label, cls, p] for (label, cls), p in sorted(self.lexical.items())
            ],
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        if data.get("version") != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {data.get('version')!r}")
        try:
            model = cls(
                roots=dict(data["roots"]),
                rules={
                    SyntacticRule(p, tuple(children)): prob
                    for p, children, prob in data["rules"]
                },
                lexical={(label, cls): p for label, cls, p in data["lexical"]},
                unk_threshold=data["unk_threshold"],
                alpha=data["alpha"],
                fallback_root=data["fallback_root"],
                fallback_pos=data["fallback_pos"],
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed model file {path}: {e}") from e
        model.validate()
        return model


def _check_standard_form(tree):
    for node in tree.subtrees():
        has_token = any(isinstance(c, str) for c in node.children)
        if has_token and (len(node.children) != 1):
            raise ValueError(
                f"node {node.label!r} mixes tokens and subtrees or holds several "
                "tokens; the parser requires one token per preterminal"
            )
        if any(marker in node.label for marker in RESERVED):
            raise ValueError(
                f"label {node.label!r} uses a reserved character ({RESERVED})"
            )


def _binarize(node):
    """Right-binarize: A -> c1 c2 .. ck becomes a chain of A|<..> tails."""
    if node.is_preterminal:
        return node
    children = [_binarize(c) for c in node.children]

    def tail(rest):
        label = node.label + BIN_OPEN + ",".join(c.label for c in rest) + BIN_CLOSE
        if len(rest) == 2:
            return ParseTree(label, tuple(rest))
        return ParseTree(label, (rest[0], tail(rest[1:])))

    if len(children) <= 2:
        return ParseTree(node.label, tuple(children))
    return ParseTree(node.label, (children[0], tail(children[1:])))


def _smooth(counts, alpha):
    """Additive smoothing on relative frequencies over the observed shapes."""
    total = sum(counts.values())
    denom = 1.0 + alpha * len(counts)
    return {item: (c / total + alpha) / denom for item, c in counts.items()}


def train(treebank, config=None, inventory=None):
    """Estimate a smoothed PCFG from trees; deterministic for a given input.

    ``inventory`` is optional; when given, trees are validated against it and
    the model keeps a reference for downstream validation.
    """
    config = config or TrainConfig()
    treebank = list(treebank)
    if not treebank:
        raise ValueError("cannot train on an empty treebank")

    root_counts = {}
    rule_counts = {}
    tag_token_counts = {}
    for tree in treebank:
        _check_standard_form(tree)
        if inventory is not None:
            validate_tree(tree, inventory)
        prepared = _binarize(tree)
        root_counts[prepared.label] = root_counts.get(prepared.label, 0) + 1
        for node in prepared.subtrees():
            if node.is_preterminal:
                counts = tag_token_counts.setdefault(node.label, {})
                token = node.children[0]
                counts[token] = counts.get(token, 0) + 1
            else:
                rule = SyntacticRule(
                    node.label, tuple(c.label for c in node.children)
                )
                rule_counts[rule] = rule_counts.get(rule, 0) + 1

    rules = {}
    by_parent = {}
    for rule, count in rule_counts.items():
        by_parent.setdefault(rule.parent, {})[rule] = count
    for parent, counts in by_parent.items():
        rules.update(_smooth(counts, config.alpha))

    # Tokens rare under a tag fold into that tag's UNK class, and every tag
    # keeps an UNK slot regardless, so no token is ever untaggable.
    lexical = {}
    fallback_pos = ""
    best_pos_count = -1
    for label, counts in tag_token_counts.items():
        total = sum(counts.values())
        if (total, label) > (best_pos_count, fallback_pos):
            best_pos_count, fallback_pos = total, label
        folded = {UNK: 0}
        for token, count in counts.items():
            if count > config.unk_threshold:
                folded[token] = count
            else:
                folded[UNK] += count
        for cls, prob in _smooth(folded, config.alpha).items():
            lexical[(label, cls)] = prob

    roots = _smooth(root_counts, config.alpha)
    fallback_root = max(root_counts, key=lambda lab: (root_counts[lab], lab))

    model = ParserModel(
        roots=roots,
        rules=rules,
        lexical=lexical,
        unk_threshold=config.unk_threshold,
        alpha=config.alpha,
        inventory=inventory,
        fallback_root=fallback_root,
        fallback_pos=fallback_pos,
    )
    model.validate()
    return model


def _debinarize(node):
    if node.is_preterminal:
        return node
    children = []
    for child in node.children:
        child = _debinarize(child)
        if BIN_OPEN in child.label:
            children.extend(child.children)
        else:
            children.append(child)
    return ParseTree(node.label, tuple(children))


def _fallback_tree(model, sentence):
    leaves = tuple(
        ParseTree(model.fallback_pos, (token,)) for token in sentence.tokens
    )
    return ParseTree(model.fallback_root, leaves)


def _close_unaries(model, cell):
    """Viterbi unary closure of one chart cell, in place.

    Only strict score improvements replace an entry: a probability-1 unary
    pair could otherwise swap backpointers into a cycle on equal scores.
    Following a cycle multiplies probabilities <= 1, so the loop terminates.
    """
    while True:
        improved = False
        for child_label, entry in list(cell.items()):
            score, _, _ = entry
            for parent, logp in model._by_unary_child.get(child_label, ()):
                candidate = score + logp
                incumbent = cell.get(parent)
                if incumbent is None or candidate > incumbent[0]:
                    cell[parent] = (
                        candidate,
                        (-1, child_label, ""),
                        ("un", child_label),
                    )
                    improved = True
        if not improved:
            return


def parse(model, sentence):
    """Viterbi-parse one sentence; never raises on coverage gaps.

    Ties are broken deterministically: the lexicographically smallest
    backpointer among equal-probability derivations.
    """
    if isinstance(sentence, (list, tuple)):
        sentence = Sentence(tuple(sentence))
    n = len(sentence.tokens)

    # chart[(i, j)] maps label -> (logprob, tiebreak, backpointer)
    chart = {}
    for i, token in enumerate(sentence.tokens):
        cell = {}
        for label, logp in model.lexical_options(token):
            cell[label] = (logp, (0, "", ""), ("lex",))
        _close_unaries(model, cell)
        chart[(i, i + 1)] = cell

    for width in range(2, n + 1):
        for start in range(0, n - width + 1):
            end = start + width
            cell = {}
            for split in range(start + 1, end):
                left_cell = chart[(start, split)]
                right_cell = chart[(split, end)]
                if not left_cell or not right_cell:
                    continue
                for left_label, (lscore, _, _) in left_cell.items():
                    for right_label, (rscore, _, _) in right_cell.items():
                        options = model._by_children.get((left_label, right_label))
                        if not options:
                            continue
                        base = lscore + rscore
                        tiebreak = (split, left_label, right_label)
                        for parent, logp in options:
                            score = base + logp
                            incumbent = cell.get(parent)
                            if (
                                incumbent is None
                                or score > incumbent[0]
                                or (score == incumbent[0] and tiebreak < incumbent[1])
                            ):
                                cell[parent] = (
                                    score,
                                    tiebreak,
                                    ("bin", split, left_label, right_label),
                                )
            _close_unaries(model, cell)
            chart[(start, end)] = cell

    top = chart[(0, n)]
    best = None
    for label, (score, _, _) in top.items():
        root_prob = model.roots.get(label)
        if root_prob is None:
            continue
        total = score + math.log(root_prob)
        if best is None or total > best[0] or (total == best[0] and label < best[1]):
            best = (total, label)
    if best is None:
        return PseudoTree(sentence, _fallback_tree(model, sentence), 0.0)

    def build(label, start, end):
        _, _, back = chart[(start, end)][label]
        if back[0] == "lex":
            return ParseTree(label, (sentence.tokens[start],))
        if back[0] == "un":
            return ParseTree(label, (build(back[1], start, end),))
        _, split, left_label, right_label = back
        return ParseTree(
            label, (build(left_label, start, split), build(right_label, split, end))
        )

    raw = build(best[1], 0, n)
    tree = _debinarize(raw)
    confidence = math.exp(best[0] / n)
    return PseudoTree(sentence, tree, confidence)


_WORKER_MODEL = None


def _init_worker(model):
    global _WORKER_MODEL
    _WORKER_MODEL = model


def _parse_in_worker(sentence):
    return parse(_WORKER_MODEL, sentence)


def parse_pool(model, sentences, jobs=1):
    """Parse many sentences; order-preserving, optionally multi-process."""
    sentences = list(sentences)
    if jobs <= 1 or len(sentences) < 2:
        return [parse(model, s) for s in sentences]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(model,)
    ) as pool:
        chunk = max(1, len(sentences) // (jobs * 4))
        return list(pool.map(_parse_in_worker, sentences, chunksize=chunk))


class PcfgBackend:
    """The pluggable parsing interface: train(trees) and parse(model, sentence)."""

    name = "pcfg"

    def __init__(self, config=None, inventory=None):
        self.config = config or TrainConfig()
        self.inventory = inventory

    def train(self, treebank):
        return train(treebank, config=self.config, inventory=self.inventory)

    def parse(self, model, sentence):
        return parse(model, sentence)

    def parse_pool(self, model, sentences, jobs=1):
        return parse_pool(model, sentences, jobs=jobs)
