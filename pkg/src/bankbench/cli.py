"""Command-line entry point: every pipeline stage as a subcommand.

Each subcommand is a thin wrapper over the library — identical inputs
give identical artifacts to direct calls.  Data goes to stdout or to
files; progress notes go to stderr.  Exit codes: 0 success, 1 usage
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(payload, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# subcommand handlers


def _cmd_synth(args) -> int:
    from .corpus import SyntheticConfig, corpus_stats, generate_synthetic, write_corpus_dir

    config = SyntheticConfig.from_dict(_read_json(args.config))
    if args.seed is not None:
        config = dataclasses.replace(config, rng_seed=args.seed)
    companies = generate_synthetic(config)
    write_corpus_dir(companies, args.out)
    stats = corpus_stats(companies)
    _progress(
        f"wrote {stats.n_companies} companies, {stats.n_reports} reports, "
        f"{stats.n_bankruptcies} bankruptcies to {args.out}"
    )
    return EXIT_OK


def _cmd_stats(args) -> int:
    from .corpus import corpus_stats, load_corpus_dir

    load = load_corpus_dir(args.corpus)
    if load.total_warnings:
        _progress(f"dropped {load.total_warnings} inconsistent records while loading")
    stats = corpus_stats(load.companies)
    yearly = stats.yearly_summary()
    rows = [
        ("companies", f"{stats.n_companies}"),
        ("reports", f"{stats.n_reports}"),
        ("bankruptcies", f"{stats.n_bankruptcies}"),
        ("doc length mean (std)", f"{stats.doc_length_mean:.1f} ({stats.doc_length_std:.1f})"),
    ]
    for name, (mean, std) in yearly.items():
        rows.append((name.replace("_", " "), f"{mean:.1f} ({std:.1f})"))
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value}")
    return EXIT_OK


def _cmd_build_dataset(args) -> int:
    from .corpus import load_corpus_dir
    from .harness import build_datasets
    from .sampling import SplitSpec, write_instances

    split = SplitSpec.from_dict(_read_json(args.split))
    companies = load_corpus_dir(args.corpus).companies
    bundle = build_datasets(companies, split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    named = {
        "train_phase1.jsonl": bundle.train_phase1,
        "train_phase2.jsonl": bundle.train_phase2,
    }
    for year, group in bundle.validation.items():
        named[f"validation_{year}.jsonl"] = group
    for year, group in bundle.test.items():
        named[f"test_{year}.jsonl"] = group
    for filename, group in named.items():
        write_instances(group, out / filename)
        positives = sum(i.label for i in group)
        _progress(f"{filename}: {len(group)} instances ({positives} positive)")
    return EXIT_OK


def _cmd_train_w2v(args) -> int:
    from .harness import train_history_embeddings
    from .sampling import load_instances

    settings = _read_json(args.config) if args.config else {}
    vocab_max_size = int(settings.pop("vocab_max_size", 50_000))
    instances = load_instances(args.instances)
    vocab, model = train_history_embeddings(
        instances,
        vocab_max_size=vocab_max_size,
        w2v_params=settings,
        seed=args.seed if args.seed is not None else 0,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "vocab.tsv")
    model.save(out / "embeddings.vec")
    _progress(
        f"trained {len(model.vocab)} x {model.dim} vectors "
        f"(epoch losses: {', '.join(f'{x:.4f}' for x in model.epoch_losses)})"
    )
    return EXIT_OK


def _load_experiment(args):
    from .harness import ExperimentConfig

    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.out is not None:
        config = dataclasses.replace(config, out_dir=str(args.out))
    return config


def _tuning_inputs(config):
    """Corpus, datasets, and model-kind-specific extras for one config."""
    from .corpus import load_corpus_dir
    from .embeddings import load_embedding_table
    from .harness import _derive_seed, build_datasets, train_history_embeddings

    companies = load_corpus_dir(config.corpus_dir).companies
    _progress(f"loaded {len(companies)} companies from {config.corpus_dir}")
    datasets = build_datasets(companies, config.split)
    _progress(
        f"training instances: phase 1 {len(datasets.train_phase1)}, "
        f"phase 2 {len(datasets.train_phase2)}"
    )
    table = None
    if config.model_kind == "imported_embedding":
        table = load_embedding_table(config.embedding_table)
        _progress(f"embedding table: {len(table)} documents")
    prebuilt = None
    if config.model_kind == "w2v":
        _progress("training phase-1 word vectors...")
        prebuilt = train_history_embeddings(
            datasets.train_phase1,
            vocab_max_size=config.vocab_max_size,
            w2v_params=config.w2v_params,
            seed=_derive_seed(config.seed, 1),
        )
    return datasets, prebuilt, table


def _cmd_tune(args) -> int:
    from .harness import tune

    config = _load_experiment(args)
    datasets, prebuilt, table = _tuning_inputs(config)
    best, results = tune(
        config, datasets, threads=args.threads, prebuilt_w2v=prebuilt, table=table
    )
    _progress(f"{len(results)} trials finished; best is trial {best.trial_id}")
    print(json.dumps(best.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_train(args) -> int:
    from .embeddings import load_embedding_table
    from .harness import _build_scorer, _derive_seed, build_datasets, train_history_embeddings
    from .corpus import load_corpus_dir

    config = _load_experiment(args)
    if args.hyperparams:
        hyperparams = _read_json(args.hyperparams)
    else:
        best_path = Path(config.out_dir) / "trials" / "best.json"
        if not best_path.is_file():
            raise FileNotFoundError(
                f"{best_path} not found; run tune first or pass --hyperparams"
            )
        hyperparams = _read_json(best_path)["hyperparams"]
    _progress(f"hyperparameters: {json.dumps(hyperparams, sort_keys=True)}")

    companies = load_corpus_dir(config.corpus_dir).companies
    datasets = build_datasets(companies, config.split)
    table = None
    if config.model_kind == "imported_embedding":
        table = load_embedding_table(config.embedding_table)
    prebuilt = None
    if config.model_kind == "w2v":
        _progress("training phase-2 word vectors...")
        prebuilt = train_history_embeddings(
            datasets.train_phase2,
            vocab_max_size=config.vocab_max_size,
            w2v_params=config.w2v_params,
            seed=_derive_seed(config.seed, 4),
        )
    scorer = _build_scorer(
        config,
        datasets.train_phase2,
        hyperparams,
        rng_seed=_derive_seed(config.seed, 3),
        prebuilt_w2v=prebuilt,
        table=table,
    )
    model_dir = Path(args.model_out or Path(config.out_dir) / "final" / "model")
    scorer.save(model_dir)
    _progress(f"saved model to {model_dir}")
    return EXIT_OK


def _resolve_model_dir(path_arg) -> Path:
    path = Path(path_arg)
    if path.is_file():  # e.g. the scorer.json inside the model directory
        return path.parent
    return path


def _cmd_evaluate(args) -> int:
    import numpy as np

    from .harness import load_scorer
    from .metrics import RankedPredictions, compute_report, write_cap_csv, write_roc_csv
    from .sampling import load_instances

    scorer = load_scorer(_resolve_model_dir(args.model))
    instances = load_instances(args.instances)
    earliest = min(i.window_start for i in instances)
    if scorer.fit_anchor_max >= earliest:
        raise RuntimeError(
            f"fitted statistics anchored at {scorer.fit_anchor_max} do not "
            f"strictly precede the earliest evaluation anchor {earliest}"
        )
    preds = RankedPredictions(
        scorer.score(instances),
        np.array([i.label for i in instances]),
    )
    report = compute_report(preds, k=args.k)
    _progress(f"scored {report.n} instances ({report.n_pos} positive)")
    if args.curves:
        curves = Path(args.curves)
        curves.mkdir(parents=True, exist_ok=True)
        write_roc_csv(preds, curves / "roc.csv")
        write_cap_csv(preds, curves / "cap.csv")
        _progress(f"wrote {curves / 'roc.csv'} and {curves / 'cap.csv'}")
    payload = report.to_json()
    if args.out:
        Path(args.out).write_text(payload + "\n")
        _progress(f"wrote {args.out}")
    else:
        print(payload)
    return EXIT_OK


def _cmd_report(args) -> int:
    from .metrics import MetricsReport

    final = Path(args.experiment) / "final"
    paths = sorted(final.glob("report_*.json"))
    if not paths:
        raise FileNotFoundError(f"no final/report_<year>.json files under {args.experiment}")
    reports = {}
    for path in paths:
        year = path.stem.removeprefix("report_")
        reports[year] = MetricsReport.from_json(path.read_text())

    years = sorted(reports)
    first = reports[years[0]]
    rows: list[tuple[str, list[str]]] = [
        ("AUC", [f"{reports[y].auc:.3f}" for y in years]),
        ("AP", [f"{reports[y].ap:.3f}" for y in years]),
        (f"recall@{first.k}", [f"{reports[y].recall_at_k:.3f}" for y in years]),
        ("CAP", [f"{reports[y].cap_ratio:.3f}" for y in years]),
    ]
    for decile in range(1, 6):
        rows.append(
            (
                str(decile),
                [f"{reports[y].cumulative_decile[decile - 1]:.3f}" for y in years],
            )
        )
    print("| Metric | " + " | ".join(years) + " |")
    print("| --- |" + " --- |" * len(years))
    for name, values in rows:
        print(f"| {name} | " + " | ".join(values) + " |")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(
        prog="bankbench",
        description="Text-based bankruptcy prediction benchmark toolkit.",
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, *, config=False, out=False):
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        if config:
            p.add_argument("--config", required=config == "required", help="JSON config file")
        if out:
            p.add_argument("--out", required=out == "required", help="output path")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    common(p, config="required", out="required")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("stats", help="summarize a corpus directory")
    p.add_argument("corpus", help="corpus directory")
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("build-dataset", help="materialize instance sets for a split")
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--split", required=True, help="split spec JSON")
    common(p, out="required")
    p.set_defaults(handler=_cmd_build_dataset)

    p = sub.add_parser("train-w2v", help="train word vectors on an instance file")
    p.add_argument("--instances", required=True, help="instances JSONL")
    common(p, config=True, out="required")
    p.set_defaults(handler=_cmd_train_w2v)

    p = sub.add_parser("tune", help="phase-1 hyperparameter search")
    common(p, config="required", out=True)
    p.add_argument(
        "--threads",
        type=int,
        default=os.cpu_count() or 1,
        help="parallel trials (default: available cores)",
    )
    p.set_defaults(handler=_cmd_tune)

    p = sub.add_parser("train", help="train the final model on phase-2 data")
    common(p, config="required", out=True)
    p.add_argument("--hyperparams", help="hyperparameter JSON (default: best tuned trial)")
    p.add_argument("--model-out", help="model directory (default: <out_dir>/final/model)")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("evaluate", help="score instances with a saved model")
    p.add_argument("--model", required=True, help="model directory (or its scorer.json)")
    p.add_argument("--instances", required=True, help="instances JSONL")
    p.add_argument("--k", type=int, default=100, help="recall@k cutoff (default 100)")
    p.add_argument("--curves", help="also write roc.csv/cap.csv to this directory")
    common(p, out=True)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("report", help="render final test reports as a Markdown table")
    p.add_argument("experiment", help="experiment output directory")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001 — runtime failures exit 2 by contract
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
