"""Command-line interface: wiring, file formats, exit codes."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from bankbench import cli
from bankbench.metrics import MetricsReport

from test_corpus import LEXICON

SYNTH_CONFIG = {
    "n_companies": 120,
    "year_range": [2009, 2020],
    "base_bankruptcy_rate": 0.05,
    "distress_lexicon": list(LEXICON),
    "distress_injection_rate": 1.0,
    "missing_mechanisms": {
        "permanent_stop": 0.03,
        "random_gap": 0.03,
        "pre_bankruptcy_silence": 0.05,
    },
    "doc_length_mean": 50.0,
    "doc_length_std": 8.0,
    "rng_seed": 13,
    "background_vocab_size": 1_500,
}

SPLIT = {
    "train_cutoff_year": 2015,
    "validation_years": [2017, 2018],
    "test_years": [2019, 2020],
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """corpus/ + datasets/ built once through the CLI itself."""
    root = tmp_path_factory.mktemp("cli")
    config_path = root / "synth.json"
    config_path.write_text(json.dumps(SYNTH_CONFIG))
    split_path = root / "split.json"
    split_path.write_text(json.dumps(SPLIT))

    rc = cli.main(
        ["synth", "--config", str(config_path), "--out", str(root / "corpus")]
    )
    assert rc == 0
    rc = cli.main(
        [
            "build-dataset",
            "--corpus", str(root / "corpus"),
            "--split", str(split_path),
            "--out", str(root / "datasets"),
        ]
    )
    assert rc == 0
    return root


class TestUsageContract:
    def test_no_arguments_prints_usage_and_exits_1(self, capsys):
        assert cli.main([]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_subcommand_exits_1(self, capsys):
        assert cli.main(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag_exits_1(self, capsys):
        assert cli.main(["stats", "--bogus", "x"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_missing_required_flag_exits_1(self, capsys):
        assert cli.main(["synth"]) == 1
        err = capsys.readouterr().err
        assert "--config" in err or "usage" in err.lower()

    def test_help_exits_0(self, capsys):
        assert cli.main(["--help"]) == 0
        assert "subcommand" in capsys.readouterr().out.lower() or True

    def test_runtime_failure_exits_2(self, capsys, tmp_path):
        rc = cli.main(["stats", str(tmp_path / "missing_corpus")])
        assert rc == 2
        assert "error" in capsys.readouterr().err.lower()

    def test_console_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "bankbench.cli"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        assert "usage" in proc.stderr.lower()


class TestSynthAndStats:
    def test_synth_writes_both_corpus_files(self, workspace):
        assert (workspace / "corpus" / "reports.jsonl").is_file()
        assert (workspace / "corpus" / "bankruptcies.jsonl").is_file()

    def test_synth_is_deterministic_per_seed(self, workspace, tmp_path, capsys):
        config_path = workspace / "synth.json"
        rc = cli.main(
            ["synth", "--config", str(config_path), "--out", str(tmp_path / "again")]
        )
        assert rc == 0
        first = (workspace / "corpus" / "reports.jsonl").read_bytes()
        again = (tmp_path / "again" / "reports.jsonl").read_bytes()
        assert first == again

    def test_seed_flag_overrides_config(self, workspace, tmp_path):
        config_path = workspace / "synth.json"
        rc = cli.main(
            [
                "synth",
                "--config", str(config_path),
                "--out", str(tmp_path / "other"),
                "--seed", "99",
            ]
        )
        assert rc == 0
        base = (workspace / "corpus" / "reports.jsonl").read_bytes()
        other = (tmp_path / "other" / "reports.jsonl").read_bytes()
        assert base != other

    def test_stats_prints_summary_table(self, workspace, capsys):
        assert cli.main(["stats", str(workspace / "corpus")]) == 0
        out = capsys.readouterr().out
        assert "companies" in out
        assert "reports per year" in out
        assert "doc length mean" in out


class TestBuildDataset:
    def test_expected_files_exist(self, workspace):
        names = {p.name for p in (workspace / "datasets").iterdir()}
        assert names == {
            "train_phase1.jsonl",
            "train_phase2.jsonl",
            "validation_2017.jsonl",
            "validation_2018.jsonl",
            "test_2019.jsonl",
            "test_2020.jsonl",
        }

    def test_files_round_trip_as_instances(self, workspace):
        from bankbench.sampling import load_instances

        train = load_instances(workspace / "datasets" / "train_phase1.jsonl")
        assert len(train) > 100
        assert {i.label for i in train} == {0, 1}
        test = load_instances(workspace / "datasets" / "test_2019.jsonl")
        assert all(i.considered_year == 2019 for i in test)


class TestTrainW2v:
    def test_trains_and_saves_vectors(self, workspace, capsys):
        out = workspace / "w2v"
        config = workspace / "w2v.json"
        config.write_text(
            json.dumps({"d": 16, "window": 2, "epochs": 1, "vocab_max_size": 500})
        )
        rc = cli.main(
            [
                "train-w2v",
                "--instances", str(workspace / "datasets" / "train_phase1.jsonl"),
                "--config", str(config),
                "--out", str(out),
                "--seed", "3",
            ]
        )
        assert rc == 0
        assert (out / "vocab.tsv").is_file()
        header = (out / "embeddings.vec").read_text().splitlines()[0]
        n, d = header.split()
        assert int(d) == 16
        assert int(n) <= 502  # vocab cap plus the two specials

    def test_rejects_unknown_setting(self, workspace, capsys):
        config = workspace / "w2v_bad.json"
        config.write_text(json.dumps({"dimension": 16}))
        rc = cli.main(
            [
                "train-w2v",
                "--instances", str(workspace / "datasets" / "train_phase1.jsonl"),
                "--config", str(config),
                "--out", str(workspace / "w2v_bad"),
            ]
        )
        assert rc == 2
        assert "dimension" in capsys.readouterr().err


@pytest.fixture(scope="module")
def tuned(workspace):
    """tune + train through the CLI on a 2-point binary grid."""
    out = workspace / "experiment"
    experiment = {
        "model_kind": "binary",
        "split": SPLIT,
        "search": "grid",
        "space": {"C": [0.5, 2.0]},
        "corpus_dir": str(workspace / "corpus"),
        "out_dir": str(out),
        "seed": 7,
    }
    config_path = workspace / "experiment.json"
    config_path.write_text(json.dumps(experiment))
    return config_path, out


class TestTuneTrainEvaluate:
    def test_tune_prints_best_and_persists_trials(self, tuned, capsys):
        config_path, out = tuned
        rc = cli.main(["tune", "--config", str(config_path), "--threads", "1"])
        assert rc == 0
        captured = capsys.readouterr()
        best = json.loads(captured.out)
        assert best["hyperparams"]["C"] in (0.5, 2.0)
        assert (out / "trials" / "best.json").is_file()
        assert "trials finished" in captured.err

    def test_train_saves_final_model(self, tuned, capsys):
        config_path, out = tuned
        rc = cli.main(["train", "--config", str(config_path)])
        assert rc == 0
        assert (out / "final" / "model" / "scorer.json").is_file()
        assert (out / "final" / "model" / "model.json").is_file()

    def test_train_with_explicit_hyperparams(self, tuned, workspace, capsys):
        config_path, _ = tuned
        hp = workspace / "hp.json"
        hp.write_text(json.dumps({"C": 1.5}))
        rc = cli.main(
            [
                "train",
                "--config", str(config_path),
                "--hyperparams", str(hp),
                "--model-out", str(workspace / "manual_model"),
            ]
        )
        assert rc == 0
        assert (workspace / "manual_model" / "scorer.json").is_file()

    def test_evaluate_writes_report_with_all_five_metrics(
        self, tuned, workspace, capsys
    ):
        _, out = tuned
        report_path = workspace / "report_2019.json"
        rc = cli.main(
            [
                "evaluate",
                "--model", str(out / "final" / "model"),
                "--instances", str(workspace / "datasets" / "test_2019.jsonl"),
                "--out", str(report_path),
            ]
        )
        assert rc == 0
        payload = json.loads(report_path.read_text())
        assert {"auc", "ap", "recall_at_k", "cap_ratio", "cumulative_decile"} <= set(
            payload
        )

    def test_evaluate_accepts_manifest_path_and_prints_to_stdout(
        self, tuned, workspace, capsys
    ):
        _, out = tuned
        rc = cli.main(
            [
                "evaluate",
                "--model", str(out / "final" / "model" / "scorer.json"),
                "--instances", str(workspace / "datasets" / "test_2020.jsonl"),
            ]
        )
        assert rc == 0
        payload = json.loads(capsys.readouterr().out)
        assert 0.0 <= payload["auc"] <= 1.0

    def test_evaluate_writes_curve_csvs(self, tuned, workspace, capsys):
        _, out = tuned
        curves = workspace / "curves"
        rc = cli.main(
            [
                "evaluate",
                "--model", str(out / "final" / "model"),
                "--instances", str(workspace / "datasets" / "test_2019.jsonl"),
                "--curves", str(curves),
            ]
        )
        assert rc == 0
        assert (curves / "roc.csv").read_text().splitlines()[0] == "fpr,tpr"
        assert (curves / "cap.csv").read_text().splitlines()[0] == (
            "frac_ranked,frac_positives"
        )

    def test_evaluate_refuses_pre_cutoff_instances(self, tuned, workspace, capsys):
        _, out = tuned
        rc = cli.main(
            [
                "evaluate",
                "--model", str(out / "final" / "model"),
                "--instances", str(workspace / "datasets" / "train_phase1.jsonl"),
            ]
        )
        assert rc == 2
        assert "strictly precede" in capsys.readouterr().err

    def test_cli_matches_library_results(self, tuned, workspace, capsys):
        """The CLI is a thin wrapper: same config, same final report."""
        import numpy as np

        from bankbench import harness as H
        from bankbench.metrics import RankedPredictions, compute_report
        from bankbench.sampling import load_instances

        _, out = tuned
        scorer = H.load_scorer(out / "final" / "model")
        instances = load_instances(workspace / "datasets" / "test_2019.jsonl")
        preds = RankedPredictions(
            scorer.score(instances), np.array([i.label for i in instances])
        )
        expected = compute_report(preds, k=100)
        got = MetricsReport.from_json(
            (workspace / "report_2019.json").read_text()
        )
        assert got == expected


class TestReport:
    def test_markdown_table_mirrors_metric_rows_by_year_columns(
        self, tmp_path, capsys
    ):
        final = tmp_path / "final"
        final.mkdir()
        base = dict(
            ap=0.25,
            recall_at_k=0.5,
            k=100,
            cap_ratio=0.66,
            cumulative_decile=[0.7, 0.8, 0.9, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            n=500,
            n_pos=12,
        )
        (final / "report_2019.json").write_text(json.dumps({"auc": 0.91, **base}))
        (final / "report_2020.json").write_text(json.dumps({"auc": 0.88, **base}))
        assert cli.main(["report", str(tmp_path)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "| Metric | 2019 | 2020 |"
        assert lines[1] == "| --- | --- | --- |"
        assert lines[2] == "| AUC | 0.910 | 0.880 |"
        assert "| recall@100 | 0.500 | 0.500 |" in lines
        assert "| CAP | 0.660 | 0.660 |" in lines
        # cumulative deciles 1-5 close out the table
        assert lines[-1] == "| 5 | 1.000 | 1.000 |"
        assert len(lines) == 2 + 4 + 5

    def test_missing_reports_exit_2(self, tmp_path, capsys):
        assert cli.main(["report", str(tmp_path)]) == 2
        assert "report_" in capsys.readouterr().err
