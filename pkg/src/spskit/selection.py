"""Ranking and Top-K selection of pseudo-trees under the six criteria.

Three signal levels: token distribution, parser confidence, and syntactic
rules.  Distribution-based kinds score a candidate as its instance distance
D(c, S) = JS(S, S + {c}) to a reference corpus: the source treebank for
``token`` and ``srs``, the rule-converted target treebank for ``csrs``.
``conf`` scores negated confidence so that lower is always better.  The
combined kinds (``srs_conf``, ``csrs_conf``) first keep the
``prefilter_multiplier * k`` best candidates by rule score, then pick the k
most confident among them; a weighted-sum combination is available for
ablations.  Candidates that received the parser's fallback tree (confidence
0) carry no usable structure and are dropped before scoring.

All orderings are total and deterministic: ties break by confidence (higher
first), then the token sequence, then the serialized tree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import ConfigError
from .rules import instance_distance
from .treebank import serialize

__all__ = ["CriterionConfig", "SelectionRefs", "score", "select_top_k", "select"]

log = logging.getLogger(__name__)

KINDS = ("token", "conf", "srs", "srs_conf", "csrs", "csrs_conf")
RULE_KIND_REFERENCE = {
    "token": "source_tokens",
    "srs": "source_rules",
    "srs_conf": "source_rules",
    "csrs": "converted_target_rules",
    "csrs_conf": "converted_target_rules",
}


@dataclass(frozen=True)
class CriterionConfig:
    kind: str
    k: int = 2000
    prefilter_multiplier: int = 2
    reference: str | None = None   # override the kind's default reference
    combine: str = "prefilter"     # or "weighted", for the combined kinds
    conf_weight: float = 0.5
    exclude_labels: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown criterion kind {self.kind!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.prefilter_multiplier < 1:
            raise ConfigError("prefilter_multiplier must be >= 1")
        if self.combine not in ("prefilter", "weighted"):
            raise ConfigError(f"unknown combine mode {self.combine!r}")
        if not 0.0 <= self.conf_weight <= 1.0:
            raise ConfigError("conf_weight must be in [0, 1]")


@dataclass
class SelectionRefs:
    """Reference distributions the criteria draw on."""

    source_tokens: object = None
    source_rules: object = None
    converted_target_rules: object = None

    def get(self, name):
        value = getattr(self, name, None)
        if value is None:
            raise ConfigError(f"missing reference distribution {name!r}")
        return value


def _candidate_key(candidate):
    return (-candidate.confidence, candidate.sentence.tokens, serialize(candidate.tree))


def score(candidates, cfg, refs):
    """(candidate, score) pairs; lower scores are better under every kind.

    Fallback-parsed candidates are dropped here.  For the combined kinds the
    returned score is the rule-distance component; confidence enters during
    selection.
    """
    usable = [c for c in candidates if c.confidence > 0.0]
    if cfg.kind == "conf":
        return [(c, -c.confidence) for c in usable]
    reference_name = cfg.reference or RULE_KIND_REFERENCE[cfg.kind]
    reference = refs.get(reference_name)
    mode = "tokens" if cfg.kind == "token" else "rules"
    return [
        (
            c,
            instance_distance(
                c, reference, mode=mode, exclude_labels=cfg.exclude_labels
            ),
        )
        for c in usable
    ]


def select_top_k(scored, cfg):
    """Top-K per the criterion; deterministic and permutation-invariant.

    Plain kinds take the k lowest scores.  Combined kinds with the default
    prefilter keep ``prefilter_multiplier * k`` candidates by rule score and
    then the k highest confidences among them; in weighted mode the two
    signals are mixed into one score first.  Asking for more than is
    available returns everything, with a warning.
    """
    scored = list(scored)
    if not scored:
        return []

    combined = cfg.kind in ("srs_conf", "csrs_conf")
    if combined and cfg.combine == "weighted":
        scored = [
            (c, (1.0 - cfg.conf_weight) * s + cfg.conf_weight * (1.0 - c.confidence))
            for c, s in scored
        ]
        combined = False

    by_score = sorted(scored, key=lambda pair: (pair[1],) + _candidate_key(pair[0]))
    if len(scored) < cfg.k:
        log.warning(
            "requested top %d but only %d candidates are scorable", cfg.k, len(scored)
        )
    if not combined:
        return [c for c, _ in by_score[: cfg.k]]

    shortlist = by_score[: cfg.prefilter_multiplier * cfg.k]
    by_confidence = sorted(
        shortlist, key=lambda pair: (-pair[0].confidence, pair[1]) + _candidate_key(pair[0])[1:]
    )
    return [c for c, _ in by_confidence[: cfg.k]]


def select(candidates, cfg, refs):
    """score + select_top_k in one call."""
    return select_top_k(score(candidates, cfg, refs), cfg)
