"""Rule-table conversion of constituency trees into SPS trees.

A mapping rule matches one local configuration: a parent label plus,
optionally, the ordered labels of its children ("*" matches any single
label; omitting the child sequence matches any children).  The rewrite
assigns an SPS label to the node itself and/or to each matched child
position.  Conversion is a top-down relabeling: node shape and leaf tokens
never change.  Labels assigned by the parent's rule win over the node's own
rewrite; nodes left with no assignment fall back to the table's default
label, or raise in strict mode.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .errors import MappingTableError, UnmappedNodeError
from .treebank import ParseTree

__all__ = ["MappingRule", "MappingTable", "convert", "convert_corpus", "ConversionReport"]

WILDCARD = "*"


@dataclass(frozen=True)
class MappingRule:
    parent_pattern: str
    child_pattern: tuple | None  # None matches any child sequence
    parent_rewrite: str | None
    child_rewrites: tuple | None  # aligned with child_pattern; None entries keep
    priority: int

    def __post_init__(self):
        if self.child_pattern is not None and len(self.child_pattern) == 0:
            raise MappingTableError("child pattern must have at least one element")
        if self.child_rewrites is not None:
            if self.child_pattern is None:
                raise MappingTableError(
                    "child rewrites require an explicit child pattern"
                )
            if len(self.child_rewrites) != len(self.child_pattern):
                raise MappingTableError(
                    "child rewrites must align with the child pattern"
                )

    def matches(self, node):
        if self.parent_pattern != WILDCARD and self.parent_pattern != node.label:
            return False
        if self.child_pattern is None:
            return True
        if len(self.child_pattern) != len(node.children):
            return False
        for pat, child in zip(self.child_pattern, node.children):
            if pat == WILDCARD:
                continue
            label = child.label if isinstance(child, ParseTree) else child
            if pat != label:
                return False
        return True


@dataclass
class MappingTable:
    rules: list
    default_label: str
    strict: bool = False

    def __post_init__(self):
        if not self.rules:
            raise MappingTableError("mapping table has no rules")
        priorities = [r.priority for r in self.rules]
        seen = Counter(priorities)
        dupes = sorted(p for p, c in seen.items() if c > 1)
        if dupes:
            raise MappingTableError(
                "duplicate priorities: " + ", ".join(map(str, dupes))
            )
        # Highest priority first, so the first match wins.
        self.rules = sorted(self.rules, key=lambda r: -r.priority)

    def best_match(self, node):
        for rule in self.rules:
            if rule.matches(node):
                return rule
        return None

    @classmethod
    def from_json(cls, path):
        """Load a table file: {"default_label": ..., "strict"?: ..., "rules": [...]}

        Each rule entry: {"pattern": {"parent": L, "children"?: [...]},
        "rewrite": {"parent"?: L, "children"?: [...]}, "priority": N}.
        Child rewrite entries may be null to leave that child to its own rule.
        """
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        try:
            rules = []
            for entry in data["rules"]:
                pattern = entry["pattern"]
                rewrite = entry.get("rewrite", {})
                children = pattern.get("children")
                child_rewrites = rewrite.get("children")
                rules.append(
                    MappingRule(
                        parent_pattern=pattern["parent"],
                        child_pattern=None if children is None else tuple(children),
                        parent_rewrite=rewrite.get("parent"),
                        child_rewrites=(
                            None if child_rewrites is None else tuple(child_rewrites)
                        ),
                        priority=entry["priority"],
                    )
                )
            return cls(
                rules=rules,
                default_label=data["default_label"],
                strict=data.get("strict", False),
            )
        except KeyError as e:
            raise MappingTableError(f"mapping table {path} missing key {e}") from e


@dataclass
class ConversionReport:
    """Per-corpus accounting of default-label fallbacks."""

    trees: int = 0
    fallback_count: int = 0
    fallbacks_by_label: Counter = field(default_factory=Counter)

    def merge(self, other):
        self.trees += other.trees
        self.fallback_count += other.fallback_count
        self.fallbacks_by_label.update(other.fallbacks_by_label)

    def to_dict(self):
        return {
            "trees": self.trees,
            "fallback_count": self.fallback_count,
            "fallbacks_by_label": dict(self.fallbacks_by_label),
        }


def convert(tree, table, report=None):
    """Relabel a constituency tree into an SPS tree using the rule table.

    Top-down: at each node the highest-priority matching rule (matched on the
    original labels) relabels the node and its child positions.  Leaf tokens
    are untouched and tree shape is preserved.
    """
    if report is None:
        report = ConversionReport()
    report.trees += 1

    def walk(node, assigned):
        rule = table.best_match(node)
        label = assigned
        if label is None and rule is not None:
            label = rule.parent_rewrite
        if label is None:
            if table.strict:
                raise UnmappedNodeError(
                    f"no rule assigns a label to node {node.label!r}"
                )
            label = table.default_label
            report.fallback_count += 1
            report.fallbacks_by_label[node.label] += 1

        child_assignments = [None] * len(node.children)
        if rule is not None and rule.child_rewrites is not None:
            child_assignments = list(rule.child_rewrites)

        new_children = []
        for child, child_assigned in zip(node.children, child_assignments):
            if isinstance(child, str):
                new_children.append(child)
            else:
                new_children.append(walk(child, child_assigned))
        return ParseTree(label, tuple(new_children))

    return walk(tree, None)


def convert_corpus(trees, table):
    """Element-wise convert; strict-mode errors carry the failing tree index."""
    report = ConversionReport()
    converted = []
    for index, tree in enumerate(trees):
        try:
            converted.append(convert(tree, table, report=report))
        except UnmappedNodeError as e:
            raise UnmappedNodeError(f"tree {index}: {e}") from e
    return converted, report
