"""Bracketed syntax trees with a partitioned SPS/POS label inventory.

Trees are immutable: a ParseTree is a labeled node whose children are either
ParseTree nodes or bare token strings (leaves).  The interchange format is
Penn-style bracketing, one tree per line, UTF-8, single-space separated.
Tokens must not contain whitespace or ASCII parentheses (CJK corpora use the
full-width variants, so this costs nothing in practice).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from .errors import LabelError, RootPromotionError, TreeSyntaxError

__all__ = [
    "ParseTree",
    "LabelInventory",
    "Sentence",
    "parse_bracketed",
    "serialize",
    "normalize_pos_nodes",
    "validate_tree",
    "read_treebank",
    "write_treebank",
    "default_inventory",
]


@dataclass(frozen=True)
class ParseTree:
    """A labeled ordered tree node; the root node stands for the whole tree.

    ``children`` holds sub-nodes and/or token strings.  A node whose children
    are all strings is a preterminal (typically a POS tag over one token).
    """

    label: str
    children: tuple

    def __post_init__(self):
        if not self.label:
            raise TreeSyntaxError("empty node label")
        if not self.children:
            raise TreeSyntaxError(f"node {self.label!r} has no children")
        for child in self.children:
            if isinstance(child, str):
                if not child or any(c.isspace() for c in child):
                    raise TreeSyntaxError(
                        f"bad token {child!r} under {self.label!r}: tokens must be "
                        "non-empty and whitespace-free"
                    )
            elif not isinstance(child, ParseTree):
                raise TreeSyntaxError(
                    f"child of {self.label!r} must be ParseTree or str, got "
                    f"{type(child).__name__}"
                )

    @property
    def is_preterminal(self):
        return all(isinstance(c, str) for c in self.children)

    def leaves(self):
        """Leaf tokens, left to right."""
        out = []
        for child in self.children:
            if isinstance(child, str):
                out.append(child)
            else:
                out.extend(child.leaves())
        return out

    def subtrees(self):
        """All internal nodes, preorder."""
        yield self
        for child in self.children:
            if isinstance(child, ParseTree):
                yield from child.subtrees()

    def sentence(self):
        return Sentence(tuple(self.leaves()))

    def __str__(self):
        return serialize(self)


@dataclass(frozen=True)
class Sentence:
    """An ordered, non-empty sequence of tokens."""

    tokens: tuple

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("sentence must have at least one token")
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise ValueError(f"bad token {tok!r}")

    @classmethod
    def from_text(cls, text):
        """Split whitespace-separated text into a Sentence."""
        return cls(tuple(text.split()))

    def text(self):
        return " ".join(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


@dataclass(frozen=True)
class LabelInventory:
    """Disjoint sets of SPS constituent labels and POS labels."""

    sps_labels: frozenset
    pos_labels: frozenset

    def __post_init__(self):
        object.__setattr__(self, "sps_labels", frozenset(self.sps_labels))
        object.__setattr__(self, "pos_labels", frozenset(self.pos_labels))
        overlap = self.sps_labels & self.pos_labels
        if overlap:
            raise LabelError(
                "sps_labels and pos_labels overlap: " + ", ".join(sorted(overlap))
            )
        if not self.sps_labels and not self.pos_labels:
            raise LabelError("inventory is empty")

    def __contains__(self, label):
        return label in self.sps_labels or label in self.pos_labels

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        try:
            return cls(frozenset(data["sps_labels"]), frozenset(data["pos_labels"]))
        except KeyError as e:
            raise LabelError(f"inventory file {path} missing key {e}") from e

    def to_json(self, path):
        data = {
            "sps_labels": sorted(self.sps_labels),
            "pos_labels": sorted(self.pos_labels),
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
            f.write("\n")


def default_inventory():
    """Inventory shipped with the package: SPS roles plus a small POS tagset."""
    text = resources.files("spskit").joinpath("data/default_inventory.json").read_text(
        encoding="utf-8"
    )
    data = json.loads(text)
    return LabelInventory(frozenset(data["sps_labels"]), frozenset(data["pos_labels"]))


def parse_bracketed(text, inventory=None, line=None):
    """Parse one balanced bracketed expression into a ParseTree.

    When ``inventory`` is given, every node label must belong to it.  ``line``
    is only used to contextualize error messages when reading corpus files.
    """
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise TreeSyntaxError("empty input", line)

    pos = 0

    def parse_node():
        nonlocal pos
        if tokens[pos] != "(":
            raise TreeSyntaxError(f"expected '(' but found {tokens[pos]!r}", line)
        pos += 1
        if pos >= len(tokens) or tokens[pos] in "()":
            raise TreeSyntaxError("node is missing a label", line)
        label = tokens[pos]
        pos += 1
        children = []
        while pos < len(tokens) and tokens[pos] != ")":
            if tokens[pos] == "(":
                children.append(parse_node())
            else:
                children.append(tokens[pos])
                pos += 1
        if pos >= len(tokens):
            raise TreeSyntaxError("unbalanced brackets: missing ')'", line)
        pos += 1  # consume ')'
        if not children:
            raise TreeSyntaxError(f"node {label!r} has no children", line)
        return ParseTree(label, tuple(children))

    tree = parse_node()
    if pos != len(tokens):
        raise TreeSyntaxError("unbalanced brackets: trailing input", line)
    if inventory is not None:
        validate_tree(tree, inventory, line=line)
    return tree


def serialize(tree):
    """Render a tree as single-spaced Penn-style bracketing.

    Round-trips through parse_bracketed for any valid tree.
    """
    parts = []
    for child in tree.children:
        parts.append(child if isinstance(child, str) else serialize(child))
    return "(" + tree.label + " " + " ".join(parts) + ")"


def validate_tree(tree, inventory, line=None):
    """Raise LabelError naming every node label absent from the inventory."""
    unknown = sorted(
        {node.label for node in tree.subtrees() if node.label not in inventory}
    )
    if unknown:
        raise LabelError("unknown labels: " + ", ".join(unknown), line)


def normalize_pos_nodes(tree, inventory):
    """Splice out POS-labeled nodes that dominate only internal nodes.

    Applied bottom-up until fixpoint: a node whose label is a POS tag and
    whose children are all internal nodes is deleted and its children take
    its place in the parent.  POS nodes directly above a token are kept.
    A deletable root with a single child is replaced by that child; with
    several children there is nowhere to promote them, which is an error.
    """

    def deletable(node):
        return node.label in inventory.pos_labels and not any(
            isinstance(c, str) for c in node.children
        )

    def walk(node):
        new_children = []
        for child in node.children:
            if isinstance(child, str):
                new_children.append(child)
                continue
            child = walk(child)
            if deletable(child):
                new_children.extend(child.children)
            else:
                new_children.append(child)
        return ParseTree(node.label, tuple(new_children))

    root = walk(tree)
    while deletable(root):
        if len(root.children) > 1:
            raise RootPromotionError(
                f"root {root.label!r} is a deletable POS node with "
                f"{len(root.children)} children and no parent to receive them"
            )
        root = root.children[0]
    return root


def read_treebank(path, inventory=None):
    """Read a one-tree-per-line file; blank lines are ignored.

    Syntax and label errors are reported with their 1-based line number.
    """
    trees = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            text = raw.strip()
            if not text:
                continue
            trees.append(parse_bracketed(text, inventory=inventory, line=lineno))
    return trees


def write_treebank(trees, path):
    with open(path, "w", encoding="utf-8") as f:
        for tree in trees:
            f.write(serialize(tree))
            f.write("\n")
