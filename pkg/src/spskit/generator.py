"""Target-domain sentence generation for self-training.

Each iteration the orchestrator samples a prompt (syntactic rules weighted by
corpus frequency, target-domain example sentences, and a Gaussian-sampled
length and rule count) and asks a backend for sentences.  Two backends ship:

* ``MockPcfgGenerator`` ancestrally samples a supplied PCFG, optionally
  steering derivations toward the prompted rules and recording the rules each
  derivation used.  It is stateless and bit-reproducible: the RNG for a call
  is derived from (backend seed, prompt hash), so repeated calls with the
  same prompt give identical batches and concurrent calls cannot interfere.
* ``ServiceGenerator`` POSTs a rendered prompt to a text-completion endpoint
  and tokenizes the reply.  Timeouts and 5xx replies retry up to a cap and
  then surface as retriable errors; an empty or garbled reply is an
  ``empty_generation`` error.  Callers treat both as a smaller pool, never a
  crashed run.
"""

from __future__ import annotations

import hashlib
import math
import statistics
import string
import time
from collections import Counter
from dataclasses import dataclass
from importlib import resources

import requests

from .errors import GenerationError
from .rules import SyntacticRule, extract_corpus_rules, format_rule
from .seeding import substream
from .treebank import ParseTree, Sentence

__all__ = [
    "SourceStats",
    "PromptConfig",
    "PromptSpec",
    "GenerationBatch",
    "Pcfg",
    "MockPcfgGenerator",
    "ServiceGenerator",
    "corpus_stats",
    "sample_prompt",
    "render_prompt",
    "generate",
    "default_template",
]


@dataclass(frozen=True)
class SourceStats:
    """Length statistics and rule frequencies of the current training data."""

    mean_length: float
    std_length: float
    rule_counts: Counter


def corpus_stats(trees, exclude_labels=()):
    trees = list(trees)
    if not trees:
        raise ValueError("cannot compute stats of an empty corpus")
    lengths = [len(t.leaves()) for t in trees]
    return SourceStats(
        mean_length=statistics.fmean(lengths),
        std_length=statistics.pstdev(lengths),
        rule_counts=extract_corpus_rules(trees, exclude_labels=exclude_labels),
    )


@dataclass(frozen=True)
class PromptConfig:
    length_sigma: float | None = None      # None -> 0.25 * mean length
    min_length: int = 2
    max_rules: int = 8
    rule_count_mean: float | None = None   # None -> max_rules / 2
    example_count: int = 3
    template_id: str = "default"


@dataclass(frozen=True)
class PromptSpec:
    rules: tuple
    examples: tuple
    target_length: int
    rule_count: int
    template_id: str = "default"

    def __post_init__(self):
        if len(self.rules) < 1:
            raise ValueError("a prompt needs at least one rule")
        if self.rule_count != len(self.rules):
            raise ValueError("rule_count must equal the number of rules")
        if self.target_length < 2:
            raise ValueError("target_length must be at least 2")
        if not self.examples:
            raise ValueError("a prompt needs at least one example sentence")


@dataclass(frozen=True)
class GenerationBatch:
    sentences: tuple
    provenance: dict
    derivations: tuple | None = None  # per-sentence rule sets, mock only


def _weighted_sample(rng, weighted_items, k):
    """k draws without replacement, probability proportional to weight."""
    pool = sorted(weighted_items)
    chosen = []
    for _ in range(min(k, len(pool))):
        total = float(sum(w for _, w in pool))
        x = rng.random() * total
        acc = 0.0
        pick = len(pool) - 1
        for idx, (_, w) in enumerate(pool):
            acc += w
            if x < acc:
                pick = idx
                break
        chosen.append(pool.pop(pick)[0])
    return chosen


def _gauss_int(rng, mean, sigma, lo, hi):
    return max(lo, min(hi, round(rng.gauss(mean, sigma))))


def sample_prompt(source_stats, target_examples, rng, config=None):
    """Draw one PromptSpec.

    Sentence length ~ round(Normal(source mean, sigma)) clamped to
    [min_length, 3 * mean]; the rule count uses the same mechanism clamped to
    [1, max_rules]; rules are drawn without replacement, weighted by their
    corpus frequency.
    """
    config = config or PromptConfig()
    target_examples = list(target_examples)
    if not target_examples:
        raise ValueError("empty example pool")
    if not source_stats.rule_counts:
        raise ValueError("source stats carry no rules to prompt with")

    mean = source_stats.mean_length
    sigma = config.length_sigma if config.length_sigma is not None else 0.25 * mean
    target_length = _gauss_int(
        rng, mean, sigma, config.min_length, max(config.min_length, round(3 * mean))
    )

    rc_mean = (
        config.rule_count_mean
        if config.rule_count_mean is not None
        else config.max_rules / 2
    )
    want = _gauss_int(rng, rc_mean, 0.25 * rc_mean, 1, config.max_rules)
    rules = _weighted_sample(rng, source_stats.rule_counts.items(), want)

    count = min(config.example_count, len(target_examples))
    examples = [
        target_examples[i] for i in rng.sample(range(len(target_examples)), count)
    ]
    return PromptSpec(
        rules=tuple(rules),
        examples=tuple(examples),
        target_length=target_length,
        rule_count=len(rules),
        template_id=config.template_id,
    )


def default_template():
    return (
        resources.files("spskit")
        .joinpath("data/prompt_template.txt")
        .read_text(encoding="utf-8")
    )


def render_prompt(spec, template=None):
    """Fill the placeholder template (${rules}, ${examples}, ${length}, ${rule_count})."""
    text = template if template is not None else default_template()
    return string.Template(text).substitute(
        rules="\n".join(format_rule(r) for r in spec.rules),
        examples="\n".join(s.text() for s in spec.examples),
        length=str(spec.target_length),
        rule_count=str(spec.rule_count),
    )


def prompt_hash(spec, template=None):
    return hashlib.sha256(render_prompt(spec, template).encode("utf-8")).hexdigest()


def generate(spec, backend):
    """Ask a backend for one batch of sentences for this prompt."""
    return backend.generate(spec)


class Pcfg:
    """An explicit PCFG for sampling: rule table plus a lexical layer.

    ``rules`` maps a nonterminal to [(tuple of child symbols, probability)];
    ``lexicon`` maps a preterminal to [(token, probability)].  A symbol must
    not appear in both tables.
    """

    def __init__(self, start, rules, lexicon):
        self.start = start
        self.rules = {
            lhs: sorted((tuple(rhs), float(p)) for rhs, p in options)
            for lhs, options in rules.items()
        }
        self.lexicon = {
            pos: sorted((str(t), float(p)) for t, p in options)
            for pos, options in lexicon.items()
        }
        overlap = set(self.rules) & set(self.lexicon)
        if overlap:
            raise ValueError(f"symbols in both tables: {sorted(overlap)}")
        if start not in self.rules and start not in self.lexicon:
            raise ValueError(f"start symbol {start!r} has no productions")
        for lhs, options in list(self.rules.items()) + list(self.lexicon.items()):
            total = sum(p for _, p in options)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{lhs!r} productions sum to {total}, not 1")

    def rule_set(self):
        return {
            SyntacticRule(lhs, rhs)
            for lhs, options in self.rules.items()
            for rhs, _ in options
        }


def pcfg_from_treebank(trees, start="<s>"):
    """Maximum-likelihood Pcfg from trees, for offline mock generation.

    Root labels hang under a virtual start symbol so corpora with several
    root labels stay samplable.  Trees must be in standard form (one token
    per preterminal).
    """
    trees = list(trees)
    if not trees:
        raise ValueError("cannot estimate a grammar from an empty treebank")
    rule_counts = {}
    lex_counts = {}
    root_counts = Counter(t.label for t in trees)
    for tree in trees:
        for node in tree.subtrees():
            if node.is_preterminal:
                if len(node.children) != 1:
                    raise ValueError(
                        f"node {node.label!r} holds several tokens; one token "
                        "per preterminal is required"
                    )
                lex_counts.setdefault(node.label, Counter())[node.children[0]] += 1
            else:
                rhs = tuple(
                    c.label if isinstance(c, ParseTree) else c for c in node.children
                )
                rule_counts.setdefault(node.label, Counter())[rhs] += 1

    def normalized(counter):
        total = sum(counter.values())
        return [(item, c / total) for item, c in sorted(counter.items())]

    rules = {lhs: normalized(c) for lhs, c in rule_counts.items()}
    rules[start] = [
        ((label,), c / len(trees)) for label, c in sorted(root_counts.items())
    ]
    lexicon = {pos: normalized(c) for pos, c in lex_counts.items()}
    return Pcfg(start, rules, lexicon)


def _choose(rng, options):
    x = rng.random()
    acc = 0.0
    for item, p in options:
        acc += p
        if x < acc:
            return item
    return options[-1][0]


class _DepthExceeded(Exception):
    pass


class MockPcfgGenerator:
    """Offline generator: seeded ancestral sampling from a PCFG.

    With ``guide_probability`` p, a sentence's derivation is steered toward
    the prompted rules: the first time a nonterminal with a prompted,
    in-grammar expansion is rewritten, one of those expansions is chosen
    (renormalized by grammar probability).  Guidance is the mock's stand-in
    for an instruction-following generator; the achieved adherence rate is a
    configuration target, not a model of any particular service.
    """

    name = "mock-pcfg"

    def __init__(
        self,
        grammar,
        seed=0,
        batch_size=10,
        guide_probability=0.75,
        length_tolerance=0.2,
        max_attempts=200,
        max_depth=40,
        record_derivations=False,
        template=None,
    ):
        self.grammar = grammar
        self.seed = seed
        self.batch_size = batch_size
        self.guide_probability = guide_probability
        self.length_tolerance = length_tolerance
        self.max_attempts = max_attempts
        self.max_depth = max_depth
        self.record_derivations = record_derivations
        self.template = template
        self._grammar_rules = grammar.rule_set()

    def length_bounds(self, target):
        lo = max(1, math.floor(target * (1 - self.length_tolerance)))
        hi = math.ceil(target * (1 + self.length_tolerance))
        return lo, hi

    def _sample_tree(self, rng, guided, prompted_by_parent):
        used = set()
        state = {"adhered": False, "nodes": 0}

        def expand(symbol, depth):
            state["nodes"] += 1
            if depth > self.max_depth or state["nodes"] > 10_000:
                raise _DepthExceeded
            if symbol in self.grammar.lexicon:
                token = _choose(rng, self.grammar.lexicon[symbol])
                return ParseTree(symbol, (token,))
            options = self.grammar.rules[symbol]
            if guided and not state["adhered"] and symbol in prompted_by_parent:
                prompted = prompted_by_parent[symbol]
                subset = [(rhs, p) for rhs, p in options if rhs in prompted]
                if subset:
                    total = sum(p for _, p in subset)
                    subset = [(rhs, p / total) for rhs, p in subset]
                    rhs = _choose(rng, subset)
                    state["adhered"] = True
                else:
                    rhs = _choose(rng, options)
            else:
                rhs = _choose(rng, options)
            used.add(SyntacticRule(symbol, rhs))
            return ParseTree(symbol, tuple(expand(s, depth + 1) for s in rhs))

        tree = expand(self.grammar.start, 0)
        return tree, frozenset(used)

    def generate(self, spec):
        rng = substream(self.seed, "mock", prompt_hash(spec, self.template))
        prompted_in_grammar = set(spec.rules) & self._grammar_rules
        prompted_by_parent = {}
        for rule in prompted_in_grammar:
            prompted_by_parent.setdefault(rule.parent, set()).add(rule.children)

        lo, hi = self.length_bounds(spec.target_length)
        sentences = []
        derivations = []
        for _ in range(self.batch_size):
            guided = rng.random() < self.guide_probability and bool(
                prompted_by_parent
            )
            accepted = None
            for attempt in range(self.max_attempts):
                # A prompted rule can be incompatible with the length bound
                # (e.g. it forces a very short derivation); after burning half
                # the attempts, this slot falls back to unguided sampling,
                # like a generator ignoring part of its instructions.
                use_guide = guided and attempt < self.max_attempts // 2
                try:
                    tree, used = self._sample_tree(rng, use_guide, prompted_by_parent)
                except _DepthExceeded:
                    continue
                n = len(tree.leaves())
                if lo <= n <= hi:
                    accepted = (tree, used)
                    break
            if accepted is None:
                continue  # this slot degrades; the pool just ends up smaller
            tree, used = accepted
            sentences.append(Sentence(tuple(tree.leaves())))
            derivations.append(used)
        if not sentences:
            raise GenerationError(
                f"no derivation of length {lo}..{hi} found in "
                f"{self.max_attempts} attempts per sentence",
                attempts=self.max_attempts,
            )
        return GenerationBatch(
            sentences=tuple(sentences),
            provenance={
                "prompt_sha256": prompt_hash(spec, self.template),
                "backend": self.name,
                "seed": self.seed,
            },
            derivations=tuple(derivations) if self.record_derivations else None,
        )


def _whitespace_tokenizer(line):
    return line.split()


class ServiceGenerator:
    """Client for a generic text-completion HTTP endpoint.

    Request body: {"prompt", "max_tokens", "temperature", "seed"?}; reply
    body: {"text": "..."}.  Bearer auth comes from ``token_env``.  A simple
    client-side token bucket enforces ``requests_per_minute``.
    """

    name = "service"

    def __init__(
        self,
        endpoint,
        token_env="SPSKIT_SERVICE_TOKEN",
        template=None,
        max_tokens=512,
        temperature=0.8,
        seed=None,
        timeout=30.0,
        max_attempts=3,
        requests_per_minute=60,
        tokenizer=_whitespace_tokenizer,
        session=None,
        sleep=time.sleep,
    ):
        self.endpoint = endpoint
        self.token_env = token_env
        self.template = template
        self.max_tokens = max_tokens
        self.temperature = temperature
        self.seed = seed
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.requests_per_minute = requests_per_minute
        self.tokenizer = tokenizer
        self.session = session or requests.Session()
        self._sleep = sleep
        self._interval = 60.0 / requests_per_minute if requests_per_minute else 0.0
        self._last_request = None

    def _throttle(self):
        if not self._interval:
            return
        now = time.monotonic()
        if self._last_request is not None:
            wait = self._interval - (now - self._last_request)
            if wait > 0:
                self._sleep(wait)
        self._last_request = time.monotonic()

    def _headers(self):
        import os

        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def generate(self, spec):
        prompt = render_prompt(spec, self.template)
        body = {
            "prompt": prompt,
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        }
        if self.seed is not None:
            body["seed"] = self.seed

        reply = None
        for attempt in range(1, self.max_attempts + 1):
            self._throttle()
            try:
                response = self.session.post(
                    self.endpoint,
                    json=body,
                    headers=self._headers(),
                    timeout=self.timeout,
                )
            except (requests.Timeout, requests.ConnectionError) as e:
                if attempt == self.max_attempts:
                    raise GenerationError(
                        f"service unreachable after {attempt} attempts: {e}",
                        attempts=attempt,
                        retriable=True,
                    ) from e
                continue
            if response.status_code >= 500:
                if attempt == self.max_attempts:
                    raise GenerationError(
                        f"service error {response.status_code} after "
                        f"{attempt} attempts",
                        attempts=attempt,
                        retriable=True,
                    )
                continue
            if response.status_code != 200:
                raise GenerationError(
                    f"service refused the request: {response.status_code}",
                    attempts=attempt,
                )
            reply = response
            break

        try:
            text = reply.json()["text"]
        except (ValueError, KeyError, TypeError) as e:
            raise GenerationError(
                "empty_generation: reply is not {'text': ...}", attempts=1
            ) from e
        sentences = []
        for line in text.splitlines():
            tokens = self.tokenizer(line.strip())
            if tokens:
                sentences.append(Sentence(tuple(tokens)))
        if not sentences:
            raise GenerationError("empty_generation: reply had no sentences")
        return GenerationBatch(
            sentences=tuple(sentences),
            provenance={
                "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
                "backend": self.name,
                "seed": self.seed,
            },
        )
