import hashlib
import json

import pytest

from spskit.cli import build_parser, main
from spskit.synthetic import sample_corpus, source_grammar, target_grammar
from spskit.treebank import read_treebank, write_treebank

SUBCOMMANDS = [
    "convert",
    "normalize",
    "transfer-seg",
    "extract-rules",
    "generate",
    "parse",
    "select",
    "train",
    "self-train",
    "eval",
    "report",
]


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def summary_line(capsys):
    lines = [
        line
        for line in capsys.readouterr().out.splitlines()
        if line.startswith("spskit:summary ")
    ]
    if not lines:
        raise AssertionError("no summary line printed")
    return json.loads(lines[-1].split(" ", 1)[1])


@pytest.fixture
def gold_file(tmp_path):
    path = tmp_path / "gold.txt"
    path.write_text(
        "(s (subj (n a)) (pred (v b)))\n(s (subj (n a)) (pred (v b) (obj (n c))))\n",
        encoding="utf-8",
    )
    return path


class TestUsageAndHelp:
    def test_every_subcommand_is_wired(self):
        parser = build_parser()
        names = set()
        for action in parser._subparsers._group_actions:
            names.update(action.choices)
        assert names == set(SUBCOMMANDS)

    @pytest.mark.parametrize("subcommand", SUBCOMMANDS)
    def test_help_documents_all_flags(self, subcommand, capsys):
        with pytest.raises(SystemExit) as exit_info:
            main([subcommand, "--help"])
        assert exit_info.value.code == 0
        text = capsys.readouterr().out
        parser = build_parser()
        sub = next(
            action.choices[subcommand]
            for action in parser._subparsers._group_actions
        )
        for action in sub._actions:
            if action.option_strings:
                assert action.option_strings[0] in text

    def test_unknown_subcommand_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exit_info:
            main(["frobnicate"])
        assert exit_info.value.code == 2

    def test_missing_required_flag_is_a_usage_error(self):
        with pytest.raises(SystemExit) as exit_info:
            main(["eval", "--pred", "x.txt"])
        assert exit_info.value.code == 2

    def test_missing_input_file_is_a_data_error(self, tmp_path, capsys):
        code = main(
            ["eval", "--pred", str(tmp_path / "nope.txt"), "--gold", str(tmp_path / "nope.txt")]
        )
        assert code == 1
        assert "not found" in capsys.readouterr().err


class TestEval:
    def test_identical_files_give_f1_100(self, gold_file, capsys):
        code = main(["eval", "--pred", str(gold_file), "--gold", str(gold_file)])
        assert code == 0
        out = capsys.readouterr().out
        assert "F1 100.00" in out

    def test_json_report_written(self, gold_file, tmp_path, capsys):
        report = tmp_path / "report.json"
        code = main(
            [
                "eval",
                "--pred", str(gold_file),
                "--gold", str(gold_file),
                "--json", str(report),
            ]
        )
        assert code == 0
        assert json.loads(report.read_text(encoding="utf-8"))["f1"] == 100.0


class TestTransferSeg:
    def test_table_3_fixture_summary(self, tmp_path, capsys):
        corpus = tmp_path / "corpus.txt"
        corpus.write_text(
            "(s (n 圣诞) (n 节))\n(s (n 武侠小说))\n(vp (v 惹火) (u 儿了))\n",
            encoding="utf-8",
        )
        lexicon = tmp_path / "lex.txt"
        lexicon.write_text("圣诞节\n武侠\n小说\n惹火上身\n", encoding="utf-8")
        split = tmp_path / "split.tsv"
        split.write_text("武侠小说\t武侠 小说\n", encoding="utf-8")
        out = tmp_path / "out.txt"
        report = tmp_path / "report.json"
        before = sha(corpus)
        code = main(
            [
                "transfer-seg",
                "--input", str(corpus),
                "--lexicon", str(lexicon),
                "--split-table", str(split),
                "--output", str(out),
                "--report", str(report),
            ]
        )
        assert code == 0
        summary = summary_line(capsys)
        assert summary["merged"] == 1
        assert summary["split"] == 1
        assert summary["misaligned"] == 1
        assert sha(corpus) == before  # inputs are never mutated
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "(s (n 圣诞节))"
        assert lines[1] == "(s (n 武侠) (n 小说))"


class TestPipeline:
    def test_convert_normalize_extract(self, tmp_path, capsys):
        treebank = tmp_path / "const.txt"
        treebank.write_text("(IP (NP (NN 指标)) (VP (VV 高于)))\n", encoding="utf-8")
        table = tmp_path / "table.json"
        table.write_text(
            json.dumps(
                {
                    "default_label": "att",
                    "rules": [
                        {
                            "pattern": {"parent": "IP", "children": ["NP", "VP"]},
                            "rewrite": {
                                "parent": "s",
                                "children": ["subject", "predicate"],
                            },
                            "priority": 10,
                        }
                    ],
                }
            ),
            encoding="utf-8",
        )
        converted = tmp_path / "sps.txt"
        assert main(
            ["convert", "--input", str(treebank), "--table", str(table),
             "--output", str(converted)]
        ) == 0
        assert summary_line(capsys)["fallback_count"] == 2

        inventory = tmp_path / "inv.json"
        inventory.write_text(
            json.dumps(
                {"sps_labels": ["s", "subject", "predicate", "att"], "pos_labels": ["n"]}
            ),
            encoding="utf-8",
        )
        normalized = tmp_path / "norm.txt"
        assert main(
            ["normalize", "--input", str(converted), "--inventory", str(inventory),
             "--output", str(normalized)]
        ) == 0

        rules_out = tmp_path / "rules.txt"
        assert main(
            ["extract-rules", "--input", str(normalized), "--output", str(rules_out)]
        ) == 0
        assert "s -> subject predicate" in rules_out.read_text(encoding="utf-8")

    def test_train_parse_select_eval(self, tmp_path, capsys):
        source = tmp_path / "source.txt"
        write_treebank(sample_corpus(source_grammar(), 120, seed=1, name="cli-src"), source)
        target_ref = tmp_path / "target_ref.txt"
        write_treebank(sample_corpus(target_grammar(), 60, seed=1, name="cli-ref"), target_ref)

        model = tmp_path / "model.json"
        assert main(["train", "--input", str(source), "--output", str(model)]) == 0

        raw = tmp_path / "raw.txt"
        raw_trees = sample_corpus(target_grammar(), 30, seed=2, name="cli-raw")
        raw.write_text(
            "".join(" ".join(t.leaves()) + "\n" for t in raw_trees), encoding="utf-8"
        )
        parsed = tmp_path / "parsed.txt"
        confidences = tmp_path / "conf.txt"
        assert main(
            ["parse", "--model", str(model), "--input", str(raw),
             "--output", str(parsed), "--confidences", str(confidences)]
        ) == 0
        assert len(read_treebank(parsed)) == 30
        assert len(confidences.read_text().splitlines()) == 30

        selected = tmp_path / "selected.txt"
        sidecar = tmp_path / "scores.json"
        assert main(
            ["select", "--candidates", str(parsed), "--confidences", str(confidences),
             "--criterion", "csrs", "--k", "5",
             "--converted-target", str(target_ref),
             "--output", str(selected), "--sidecar", str(sidecar)]
        ) == 0
        assert summary_line(capsys)["selected"] == 5
        assert len(read_treebank(selected)) == 5
        entries = json.loads(sidecar.read_text(encoding="utf-8"))
        assert sum(1 for e in entries if e["selected"]) == 5

        assert main(["eval", "--pred", str(parsed), "--gold", str(parsed)]) == 0

    def test_generate_with_mock_backend(self, tmp_path, capsys):
        stats_treebank = tmp_path / "stats.txt"
        write_treebank(sample_corpus(source_grammar(), 50, seed=3, name="cli-stats"), stats_treebank)
        grammar_treebank = tmp_path / "grammar.txt"
        write_treebank(sample_corpus(target_grammar(), 80, seed=3, name="cli-gram"), grammar_treebank)
        examples = tmp_path / "examples.txt"
        examples.write_text("na va\nnb vb nc\n", encoding="utf-8")
        out = tmp_path / "sentences.txt"
        code = main(
            ["--seed", "5",
             "generate", "--stats-from", str(stats_treebank),
             "--examples", str(examples), "--count", "25",
             "--backend", "mock", "--mock-treebank", str(grammar_treebank),
             "--output", str(out)]
        )
        assert code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 25
        assert (tmp_path / "sentences.txt.provenance.json").exists()
        # determinism under the same seed
        out2 = tmp_path / "sentences2.txt"
        main(
            ["--seed", "5",
             "generate", "--stats-from", str(stats_treebank),
             "--examples", str(examples), "--count", "25",
             "--backend", "mock", "--mock-treebank", str(grammar_treebank),
             "--output", str(out2)]
        )
        assert out.read_text() == out2.read_text()


class TestSelfTrainCommand:
    def make_config(self, tmp_path, seeds=None):
        paths = {}
        for name, trees in (
            ("source", sample_corpus(source_grammar(), 80, seed=4, name="st-src")),
            ("ref", sample_corpus(target_grammar(), 40, seed=4, name="st-ref")),
            ("src_dev", sample_corpus(source_grammar(), 15, seed=4, name="st-sdev")),
            ("tgt_dev", sample_corpus(target_grammar(), 15, seed=4, name="st-tdev")),
        ):
            path = tmp_path / f"{name}.txt"
            write_treebank(trees, path)
            paths[name] = str(path)
        examples = tmp_path / "examples.txt"
        ref_trees = read_treebank(paths["ref"])
        examples.write_text(
            "".join(" ".join(t.leaves()) + "\n" for t in ref_trees), encoding="utf-8"
        )
        config = {
            "source_treebank": paths["source"],
            "target_examples": str(examples),
            "converted_target_treebank": paths["ref"],
            "source_dev": paths["src_dev"],
            "target_dev": paths["tgt_dev"],
            "criterion": {"kind": "csrs", "k": 4},
            "iterations": 1,
            "pool_size": 20,
            "prompt": {"length_sigma": 0.0},
            "generator": {"backend": "mock", "treebank": paths["ref"]},
            "out_dir": str(tmp_path / "run"),
        }
        if seeds:
            config["seeds"] = seeds
        path = tmp_path / "run.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        return path

    def test_deterministic_manifests(self, tmp_path, capsys):
        config = self.make_config(tmp_path)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert main(["self-train", "--config", str(config), "--seed", "7",
                     "--out-dir", str(out1)]) == 0
        assert main(["self-train", "--config", str(config), "--seed", "7",
                     "--out-dir", str(out2)]) == 0
        m1 = (out1 / "manifest.json").read_text(encoding="utf-8")
        m2 = (out2 / "manifest.json").read_text(encoding="utf-8")
        assert m1 == m2

    def test_multiseed_aggregate(self, tmp_path, capsys):
        config = self.make_config(tmp_path, seeds=[1, 2])
        assert main(["self-train", "--config", str(config)]) == 0
        summary = summary_line(capsys)
        assert summary["seeds"] == [1, 2]
        aggregate = json.loads(
            (tmp_path / "run" / "aggregate.json").read_text(encoding="utf-8")
        )
        assert len(aggregate["mean_target_f1"]) == 2

    def test_report_subcommand(self, tmp_path, capsys):
        config = self.make_config(tmp_path)
        out = tmp_path / "single"
        main(["self-train", "--config", str(config), "--seed", "3",
              "--out-dir", str(out)])
        capsys.readouterr()
        assert main(["report", "--manifest", str(out / "manifest.json")]) == 0
        text = capsys.readouterr().out
        assert "tgt F1" in text
        assert "spskit:summary" in text
