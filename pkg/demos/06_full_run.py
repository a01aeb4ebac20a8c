"""The complete benchmark workflow, end to end
==============================================

Everything the library does is also reachable from the command line:
generate a corpus, inspect it, materialize datasets, tune a model on
validation years, retrain at the test-time cutoff, evaluate each test
year, and render the final report table.  This script drives those
subcommands in-process, in order, exactly as a shell session would.

The experiment protocol has two phases.  Tuning trains candidate
models on data through the training cutoff and selects by weighted
validation AUC; the final model is then retrained with the cutoff
advanced to two years before the first test year (so training labels
can never overlap a test window), and every test-year evaluation
checks that the model's newest training anchor strictly precedes the
evaluation anchors.
"""

import json
import tempfile
from pathlib import Path

from bankbench import cli
from bankbench.corpus import MissingMechanisms, SyntheticConfig
from bankbench.harness import ExperimentConfig
from bankbench.sampling import SplitSpec

OUT = Path(tempfile.gettempdir()) / "bankbench_demos" / "06_full_run"
OUT.mkdir(parents=True, exist_ok=True)


def run(*args: str, expect: int = 0) -> int:
    # flush so the command line lands before the CLI's stderr progress
    # when this script's output is piped
    print(f"\n$ bankbench {' '.join(args)}", flush=True)
    rc = cli.main(list(args))
    assert rc == expect, f"exit code {rc}, expected {expect}"
    return rc


# ----------------------------------------------------------------------
# 1. Generate and inspect a corpus
# ----------------------------------------------------------------------
synth = SyntheticConfig(
    n_companies=250,
    year_range=(2009, 2020),
    base_bankruptcy_rate=0.05,
    distress_lexicon=(
        "waiver", "covenant", "forbearance", "insolvency", "liquidity",
        "collateral", "indenture", "severance", "downgrade", "impairment",
    ),
    distress_injection_rate=1.0,
    missing_mechanisms=MissingMechanisms(0.03, 0.03, 0.05),
    doc_length_mean=60,
    doc_length_std=10,
    rng_seed=11,
    background_vocab_size=2000,
)
synth_path = OUT / "synth.json"
synth_path.write_text(json.dumps(synth.to_dict(), indent=2), encoding="utf-8")
corpus_dir = OUT / "corpus"

run("synth", "--config", str(synth_path), "--out", str(corpus_dir))
run("stats", str(corpus_dir))

# ----------------------------------------------------------------------
# 2. Materialize the datasets the experiment will use
# ----------------------------------------------------------------------
split = SplitSpec(
    train_cutoff_year=2015,
    validation_years=(2017, 2018),
    test_years=(2019, 2020),
)
split_path = OUT / "split.json"
split_path.write_text(json.dumps(split.to_dict(), indent=2), encoding="utf-8")
datasets_dir = OUT / "datasets"

run("build-dataset", "--corpus", str(corpus_dir),
    "--split", str(split_path), "--out", str(datasets_dir))

# ----------------------------------------------------------------------
# 3. Tune, then retrain at the test-time cutoff
# ----------------------------------------------------------------------
exp_dir = OUT / "experiment"
config = ExperimentConfig(
    model_kind="binary",
    split=split,
    search="grid",
    space={"C": [0.25, 1.0, 4.0]},
    corpus_dir=str(corpus_dir),
    out_dir=str(exp_dir),
    seed=7,
)
exp_dir.mkdir(exist_ok=True)
config.save(exp_dir / "experiment.json")

run("tune", "--config", str(exp_dir / "experiment.json"), "--threads", "2")
run("train", "--config", str(exp_dir / "experiment.json"))

# ----------------------------------------------------------------------
# 4. Evaluate the held-out years
# ----------------------------------------------------------------------
model_dir = exp_dir / "final" / "model"
for year in (2019, 2020):
    run("evaluate",
        "--model", str(model_dir),
        "--instances", str(datasets_dir / f"test_{year}.jsonl"),
        "--k", "50",
        "--out", str(exp_dir / "final" / f"report_{year}.json"))

# The guard that makes the protocol leakage-safe: this model was
# retrained with data through the 2017 cutoff, so evaluating the 2017
# validation year (whose anchors it has already seen) must be refused.
run("evaluate",
    "--model", str(model_dir),
    "--instances", str(datasets_dir / "validation_2017.jsonl"),
    expect=2)
print("(refused, as it must be)")

# ----------------------------------------------------------------------
# 5. The final table
# ----------------------------------------------------------------------
run("report", str(exp_dir))
print(f"\nall artifacts under {OUT}")
