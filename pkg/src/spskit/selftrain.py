"""The iterative self-training loop: extract, generate, train, parse, select.

Iteration 0 trains the parser on source data alone.  Every later iteration
re-extracts syntactic rules from the current training set (source plus
accepted pseudo-trees, so prompts drift toward the target domain), generates
a fresh candidate pool, parses it with the current parser, selects the top K
under the configured criterion, appends them to the pseudo-tree set, retrains
from scratch, and evaluates on the held-out dev sets.  Accepted pseudo-trees
persist for all later iterations.

Dev and test sentences are barred from the prompt example pool and from the
candidate pool by token-sequence hash, so they can never leak into training.
All randomness flows from the run seed through per-iteration substreams,
which also makes interrupted runs resumable: the manifest and the selected
trees are persisted after every iteration, and a resumed run replays the
accepted trees and continues with the exact substreams a straight run would
have used.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field

from .errors import ConfigError, GenerationError
from .evaluation import ScoreOptions, score_corpus
from .generator import PromptConfig, corpus_stats, sample_prompt
from .rules import RuleDistribution, extract_corpus_rules, token_counts
from .seeding import substream
from .selection import CriterionConfig, SelectionRefs, score, select_top_k
from .treebank import read_treebank, write_treebank

__all__ = ["Experiment", "IterationRecord", "RunManifest", "run", "run_multiseed"]

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


@dataclass
class Experiment:
    """Everything one self-training run needs, as in-memory objects."""

    source_trees: list
    target_examples: list          # Sentence pool for prompt examples
    parser_backend: object
    generator_backend: object
    criterion: CriterionConfig
    iterations: int = 4
    pool_size: int = 10000
    seed: int = 0
    converted_target_trees: list | None = None
    source_dev: list | None = None
    target_dev: list | None = None
    exclude_sentences: tuple = ()  # e.g. test sets, barred like the dev sets
    prompt_config: PromptConfig = field(default_factory=PromptConfig)
    score_options: ScoreOptions = field(default_factory=ScoreOptions)
    rule_exclude_labels: tuple = ()
    update_reference: bool = False
    jobs: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.pool_size < 1:
            raise ConfigError("pool_size must be >= 1")
        if not self.source_trees:
            raise ConfigError("source treebank is empty")
        if self.criterion.kind.startswith("csrs") and not self.converted_target_trees:
            raise ConfigError(
                f"criterion {self.criterion.kind!r} needs converted_target_trees"
            )

    def config_snapshot(self):
        def jsonable(data):
            return json.loads(json.dumps(data, sort_keys=True, default=list))

        return {
            "iterations": self.iterations,
            "pool_size": self.pool_size,
            "k": self.criterion.k,
            "seed": self.seed,
            "criterion": jsonable(dataclasses.asdict(self.criterion)),
            "prompt_config": jsonable(dataclasses.asdict(self.prompt_config)),
            "score_options": {
                "include_root": self.score_options.include_root,
                "include_pos": self.score_options.include_pos,
                "exclude_labels": sorted(self.score_options.exclude_labels),
            },
            "rule_exclude_labels": sorted(self.rule_exclude_labels),
            "update_reference": self.update_reference,
            "parser_backend": getattr(self.parser_backend, "name", "custom"),
            "generator_backend": getattr(self.generator_backend, "name", "custom"),
            "source_size": len(self.source_trees),
            "example_pool_size": len(self.target_examples),
            "converted_target_size": (
                len(self.converted_target_trees)
                if self.converted_target_trees
                else 0
            ),
        }


@dataclass
class IterationRecord:
    iteration: int
    pool_size: int
    k: int
    criterion: str
    selected_ids: list
    train_size: int
    dev_f1_source: float | None
    dev_f1_target: float | None
    seed: int

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass
class RunManifest:
    config: dict
    records: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    status: str = "running"
    version: int = MANIFEST_VERSION

    def to_dict(self):
        return {
            "version": self.version,
            "status": self.status,
            "config": self.config,
            "records": [r.to_dict() for r in self.records],
            "artifacts": self.artifacts,
        }

    def save(self, path):
        _atomic_write_json(path, self.to_dict())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        return cls(
            config=data["config"],
            records=[IterationRecord.from_dict(r) for r in data["records"]],
            artifacts=data["artifacts"],
            status=data["status"],
            version=data["version"],
        )


def _atomic_write_json(path, data):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sentence_key(sentence):
    return tuple(sentence.tokens)


def _build_refs(experiment, pseudo_trees=()):
    source = list(experiment.source_trees) + list(pseudo_trees)
    refs = SelectionRefs()
    refs.source_tokens = RuleDistribution(token_counts(source))
    refs.source_rules = RuleDistribution(
        extract_corpus_rules(source, exclude_labels=experiment.rule_exclude_labels)
    )
    if experiment.converted_target_trees:
        refs.converted_target_rules = RuleDistribution(
            extract_corpus_rules(
                experiment.converted_target_trees,
                exclude_labels=experiment.rule_exclude_labels,
            )
        )
    return refs


def _dev_f1(backend, model, golds, opts):
    if not golds:
        return None
    preds = [backend.parse(model, gold.sentence()).tree for gold in golds]
    return round(score_corpus(preds, golds, opts).f1, 4)


def _build_pool(experiment, iteration, stats, example_pool, excluded):
    """Generate up to pool_size distinct candidate sentences for one iteration."""
    rng = substream(experiment.seed, "generate", iteration)
    pool = []
    seen = set()
    failures = 0
    max_failures = 20
    max_batches = 50 + 10 * experiment.pool_size
    batches = 0
    while len(pool) < experiment.pool_size and batches < max_batches:
        batches += 1
        spec = sample_prompt(
            stats, example_pool, rng, config=experiment.prompt_config
        )
        try:
            batch = experiment.generator_backend.generate(spec)
        except GenerationError as e:
            failures += 1
            log.warning("generation failed (%d in a row): %s", failures, e)
            if failures >= max_failures:
                log.warning(
                    "giving up on iteration %d pool at %d/%d sentences",
                    iteration,
                    len(pool),
                    experiment.pool_size,
                )
                break
            continue
        failures = 0
        for sentence in batch.sentences:
            key = _sentence_key(sentence)
            if key in excluded or key in seen:
                continue
            seen.add(key)
            pool.append(sentence)
            if len(pool) >= experiment.pool_size:
                break
    return pool


def _parse_pool(experiment, model, sentences):
    backend = experiment.parser_backend
    pool_fn = getattr(backend, "parse_pool", None)
    if pool_fn is not None:
        return pool_fn(model, sentences, jobs=experiment.jobs)
    return [backend.parse(model, s) for s in sentences]


def _persist_iteration(experiment, manifest, iteration, selected, scored_by_id):
    if experiment.out_dir is None:
        return
    os.makedirs(experiment.out_dir, exist_ok=True)
    tree_name = f"selected_iter_{iteration}.txt"
    write_treebank(
        [p.tree for p in selected], os.path.join(experiment.out_dir, tree_name)
    )
    sidecar = [
        {
            "id": cid,
            "kind": experiment.criterion.kind,
            "score": scored_by_id[cid][1],
            "confidence": scored_by_id[cid][0].confidence,
            "sentence": scored_by_id[cid][0].sentence.text(),
        }
        for cid in sorted(scored_by_id)
    ]
    score_name = f"scores_iter_{iteration}.json"
    _atomic_write_json(os.path.join(experiment.out_dir, score_name), sidecar)
    # Paths are stored relative to the run directory so manifests stay
    # byte-identical across runs and survive a directory move.
    manifest.artifacts[f"selected_iter_{iteration}"] = tree_name
    manifest.artifacts[f"scores_iter_{iteration}"] = score_name
    manifest.save(os.path.join(experiment.out_dir, MANIFEST_NAME))


def run(experiment, resume=False):
    """Execute one self-training run; returns the manifest.

    With ``resume=True`` and a manifest already present in ``out_dir``, the
    completed iterations are replayed from their persisted artifacts and the
    run continues where it stopped.
    """
    manifest = RunManifest(config=experiment.config_snapshot())
    pseudo_trees = []
    start_iteration = 0
    model = None

    manifest_path = (
        os.path.join(experiment.out_dir, MANIFEST_NAME)
        if experiment.out_dir
        else None
    )
    if resume:
        if manifest_path is None:
            raise ConfigError("resume requires out_dir")
        if os.path.exists(manifest_path):
            manifest = RunManifest.load(manifest_path)
            if manifest.config != experiment.config_snapshot():
                raise ConfigError("resume config does not match the stored manifest")
            for record in manifest.records:
                if record.iteration == 0:
                    continue
                name = manifest.artifacts[f"selected_iter_{record.iteration}"]
                pseudo_trees.extend(
                    read_treebank(os.path.join(experiment.out_dir, name))
                )
            start_iteration = len(manifest.records)
            manifest.status = "running"
            if start_iteration > 0:
                model = experiment.parser_backend.train(
                    list(experiment.source_trees) + pseudo_trees
                )

    excluded = {
        _sentence_key(t.sentence())
        for t in (experiment.source_dev or []) + (experiment.target_dev or [])
    }
    for sentence in experiment.exclude_sentences:
        excluded.add(_sentence_key(sentence))
    example_pool = [
        s for s in experiment.target_examples if _sentence_key(s) not in excluded
    ]
    if not example_pool:
        raise ConfigError("no target example sentences survive dev/test exclusion")

    refs = _build_refs(
        experiment, pseudo_trees if experiment.update_reference else ()
    )

    try:
        for iteration in range(start_iteration, experiment.iterations + 1):
            if iteration == 0:
                model = experiment.parser_backend.train(experiment.source_trees)
                record = IterationRecord(
                    iteration=0,
                    pool_size=0,
                    k=experiment.criterion.k,
                    criterion=experiment.criterion.kind,
                    selected_ids=[],
                    train_size=len(experiment.source_trees),
                    dev_f1_source=_dev_f1(
                        experiment.parser_backend,
                        model,
                        experiment.source_dev,
                        experiment.score_options,
                    ),
                    dev_f1_target=_dev_f1(
                        experiment.parser_backend,
                        model,
                        experiment.target_dev,
                        experiment.score_options,
                    ),
                    seed=experiment.seed,
                )
                manifest.records.append(record)
                if manifest_path:
                    os.makedirs(experiment.out_dir, exist_ok=True)
                    manifest.save(manifest_path)
                continue

            stats = corpus_stats(
                list(experiment.source_trees) + pseudo_trees,
                exclude_labels=experiment.rule_exclude_labels,
            )
            pool = _build_pool(experiment, iteration, stats, example_pool, excluded)
            candidates = _parse_pool(experiment, model, pool)
            scored = score(candidates, experiment.criterion, refs)
            selected = select_top_k(scored, experiment.criterion)

            id_by_candidate = {id(c): i for i, c in enumerate(candidates)}
            scored_by_id = {
                id_by_candidate[id(c)]: (c, s) for c, s in scored
            }
            selected_ids = [id_by_candidate[id(c)] for c in selected]
            selected_scored = {
                cid: scored_by_id[cid] for cid in selected_ids
            }

            pseudo_trees.extend(p.tree for p in selected)
            if experiment.update_reference:
                refs = _build_refs(experiment, pseudo_trees)
            train_set = list(experiment.source_trees) + pseudo_trees
            model = experiment.parser_backend.train(train_set)

            record = IterationRecord(
                iteration=iteration,
                pool_size=len(pool),
                k=experiment.criterion.k,
                criterion=experiment.criterion.kind,
                selected_ids=selected_ids,
                train_size=len(train_set),
                dev_f1_source=_dev_f1(
                    experiment.parser_backend,
                    model,
                    experiment.source_dev,
                    experiment.score_options,
                ),
                dev_f1_target=_dev_f1(
                    experiment.parser_backend,
                    model,
                    experiment.target_dev,
                    experiment.score_options,
                ),
                seed=experiment.seed,
            )
            manifest.records.append(record)
            _persist_iteration(
                experiment, manifest, iteration, selected, selected_scored
            )
    except Exception:
        manifest.status = "aborted"
        if manifest_path and manifest.records:
            manifest.save(manifest_path)
        raise

    manifest.status = "complete"
    if manifest_path:
        os.makedirs(experiment.out_dir, exist_ok=True)
        manifest.save(manifest_path)
    return manifest


def run_multiseed(experiment, seeds):
    """Independent runs per seed, aggregated into mean F1 per iteration.

    Individual run failures are tolerated: the aggregate covers whatever
    completed, with a warning.
    """
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("run_multiseed needs at least one seed")

    manifests = {}
    for seed in seeds:
        per_seed = dataclasses.replace(
            experiment,
            seed=seed,
            out_dir=(
                os.path.join(experiment.out_dir, f"seed_{seed}")
                if experiment.out_dir
                else None
            ),
        )
        try:
            manifests[seed] = run(per_seed)
        except Exception as e:  # noqa: BLE001 - partial aggregation is the contract
            log.warning("run with seed %s failed: %s", seed, e)

    if not manifests:
        raise RuntimeError("all seeds failed")
    if len(manifests) < len(seeds):
        log.warning(
            "aggregating %d of %d seeds", len(manifests), len(seeds)
        )

    iterations = min(len(m.records) for m in manifests.values())
    per_seed = {
        seed: {
            "target_f1": [r.dev_f1_target for r in m.records],
            "source_f1": [r.dev_f1_source for r in m.records],
        }
        for seed, m in manifests.items()
    }

    def mean_at(key, i):
        values = [per_seed[s][key][i] for s in manifests]
        if any(v is None for v in values):
            return None
        return sum(values) / len(values)

    return {
        "seeds": sorted(manifests),
        "requested_seeds": seeds,
        "iterations": iterations - 1,
        "per_seed": per_seed,
        "mean_target_f1": [mean_at("target_f1", i) for i in range(iterations)],
        "mean_source_f1": [mean_at("source_f1", i) for i in range(iterations)],
        "manifests": {seed: m.to_dict() for seed, m in manifests.items()},
    }
