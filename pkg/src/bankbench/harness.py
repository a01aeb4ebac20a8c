"""End-to-end experiment orchestration.

An experiment is described by one :class:`ExperimentConfig` and runs in
two phases, mirroring how the benchmark is meant to be used:

* phase 1 — train candidate models on instances anchored up to the
  first cutoff year and pick hyperparameters by weighted validation-year
  AUC (weights = instance counts);
* phase 2 — retrain with the winning hyperparameters on instances up to
  ``min(test_years) - 2`` (the latest cutoff whose labels are complete
  before the first test year) and report metrics per test year.

Four model kinds are wired: ``binary`` and ``tfidf`` (bag-of-words +
logistic regression, trained on a 90/10 undersample), ``w2v``
(skip-gram doc means + MLP), and ``imported_embedding`` (external
document-vector table + MLP).  Embedding models never undersample.

Leakage guard: every saved scorer records ``fit_anchor_max`` — the
latest window-start date of any instance that influenced a fitted
statistic — and evaluation refuses to score an instance set whose
earliest anchor does not strictly follow it.

All randomness flows from the experiment seed through named
``SeedSequence`` streams, so a rerun with the same config reproduces
every artifact bitwise.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .embeddings import (
    DocEmbedding,
    SkipGramModel,
    concat_history,
    embed_doc,
    load_embedding_table,
    train_skipgram,
)
from .features import (
    FeatureSelector,
    FeatureSpace,
    SparseVector,
    binarize,
    fit_tfidf,
    instance_grams,
    project,
    select_top_k,
    stack_csr,
)
from .linear import LogisticModel, train_logreg
from .metrics import MetricsReport, RankedPredictions, compute_report, roc_auc
from .neural import MlpHyperparams, MlpModel, train_mlp
from .sampling import (
    FirmYearInstance,
    SplitSpec,
    build_eval_set,
    build_training_set,
    undersample,
)
from .textprep import Vocabulary, apply_vocab, build_vocab, preprocess

__all__ = [
    "MODEL_KINDS",
    "ExperimentConfig",
    "TrialResult",
    "ClassicalScorer",
    "EmbeddingScorer",
    "load_scorer",
    "classical_pipeline",
    "embedding_pipeline",
    "DatasetBundle",
    "build_datasets",
    "tune",
    "StageError",
    "run_experiment",
]

MODEL_KINDS = ("binary", "tfidf", "w2v", "imported_embedding")
CLASSICAL_KINDS = ("binary", "tfidf")
EMBEDDING_KINDS = ("w2v", "imported_embedding")

# classical training keeps all positives and downsamples negatives 9:1
UNDERSAMPLE_MAJORITY_FRAC = 0.90
# the presence/absence model always selects this many features
BINARY_K = 20
# share of embedding-model training instances carved out for early stopping
EARLY_STOP_FRAC = 0.10

_SPACE_KEYS = {
    "binary": frozenset({"C"}),
    "tfidf": frozenset({"C", "k"}),
    "w2v": frozenset({"learning_rate", "weight_decay", "hidden", "dropout"}),
    "imported_embedding": frozenset(
        {"learning_rate", "weight_decay", "hidden", "dropout"}
    ),
}

_W2V_DEFAULTS = {"d": 100, "window": 5, "negatives": 5, "epochs": 5, "lr": 0.025}
_MLP_DEFAULTS = {"batch_size": 64, "max_epochs": 200, "patience": 10}


@lru_cache(maxsize=200_000)
def _tokens(text: str) -> tuple[str, ...]:
    """Preprocessed tokens of one raw text, cached — texts repeat across
    history slots, trials, and phases."""
    return tuple(preprocess(text))


def _derive_seed(*path: int) -> int:
    """A stable independent integer seed for a named stream."""
    return int(np.random.SeedSequence(list(path)).generate_state(1)[0])


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs, JSON-serializable."""

    model_kind: str
    split: SplitSpec
    search: str
    space: Mapping[str, object]
    corpus_dir: str
    out_dir: str
    n_trials: int | None = None
    seed: int = 0
    vocab_max_size: int = 50_000
    embedding_table: str | None = None
    w2v: Mapping[str, object] = field(default_factory=dict)
    mlp: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"unknown model_kind {self.model_kind!r}")
        if self.search not in ("grid", "random"):
            raise ValueError(f"search must be 'grid' or 'random', got {self.search!r}")
        if self.search == "random":
            if not self.n_trials or self.n_trials < 1:
                raise ValueError("random search requires n_trials >= 1")
        elif self.n_trials is not None:
            raise ValueError("n_trials only applies to random search")
        if not self.split.validation_years:
            raise ValueError("tuning requires at least one validation year")
        if self.model_kind == "binary" and "k" in self.space:
            raise ValueError(
                f"the binary model always selects k={BINARY_K} features; "
                "remove 'k' from the search space"
            )
        want = _SPACE_KEYS[self.model_kind]
        if set(self.space) != want:
            raise ValueError(
                f"{self.model_kind} search space must define exactly "
                f"{sorted(want)}, got {sorted(self.space)}"
            )
        for name, sub in self.space.items():
            self._check_dimension(name, sub)
        if self.model_kind == "imported_embedding" and not self.embedding_table:
            raise ValueError("imported_embedding requires embedding_table")
        if self.vocab_max_size <= 0:
            raise ValueError("vocab_max_size must be positive")
        unknown_w2v = set(self.w2v) - set(_W2V_DEFAULTS)
        if unknown_w2v:
            raise ValueError(f"unknown w2v settings: {sorted(unknown_w2v)}")
        unknown_mlp = set(self.mlp) - set(_MLP_DEFAULTS)
        if unknown_mlp:
            raise ValueError(f"unknown mlp settings: {sorted(unknown_mlp)}")

    def _check_dimension(self, name: str, sub) -> None:
        if self.search == "grid":
            if not isinstance(sub, (list, tuple)) or len(sub) == 0:
                raise ValueError(
                    f"grid dimension {name!r} must be a non-empty list"
                )
            return
        if isinstance(sub, (list, tuple)):
            if len(sub) == 0:
                raise ValueError(f"choice dimension {name!r} is empty")
            return
        if isinstance(sub, Mapping) and len(sub) == 1:
            (kind, args), = sub.items()
            if kind == "choice" and isinstance(args, (list, tuple)) and args:
                return
            if kind in ("uniform", "loguniform"):
                if (
                    isinstance(args, (list, tuple))
                    and len(args) == 2
                    and args[0] < args[1]
                    and (kind == "uniform" or args[0] > 0)
                ):
                    return
        raise ValueError(
            f"random dimension {name!r} must be a value list or one of "
            "{'uniform': [lo, hi]}, {'loguniform': [lo, hi]}, {'choice': [...]}"
        )

    @property
    def history_len(self) -> int:
        return self.split.history_len

    @property
    def w2v_params(self) -> dict:
        return {**_W2V_DEFAULTS, **dict(self.w2v)}

    @property
    def mlp_params(self) -> dict:
        return {**_MLP_DEFAULTS, **dict(self.mlp)}

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "split": self.split.to_dict(),
            "search": self.search,
            "space": {k: v for k, v in self.space.items()},
            "corpus_dir": self.corpus_dir,
            "out_dir": self.out_dir,
            "n_trials": self.n_trials,
            "seed": self.seed,
            "vocab_max_size": self.vocab_max_size,
            "embedding_table": self.embedding_table,
            "w2v": dict(self.w2v),
            "mlp": dict(self.mlp),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ExperimentConfig":
        data = dict(payload)
        data["split"] = SplitSpec.from_dict(data["split"])
        return cls(**data)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def grid_assignments(space: Mapping[str, Sequence]) -> list[dict]:
    """The full cross-product, keys sorted, row order deterministic."""
    names = sorted(space)
    rows = itertools.product(*(space[name] for name in names))
    return [dict(zip(names, row)) for row in rows]


def random_assignments(
    space: Mapping[str, object], n_trials: int, seed: int
) -> list[dict]:
    """``n_trials`` seeded draws from the declared distributions."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    out = []
    for _ in range(n_trials):
        assignment = {}
        for name in sorted(space):
            sub = space[name]
            if isinstance(sub, (list, tuple)):
                assignment[name] = sub[int(rng.integers(len(sub)))]
            else:
                (kind, args), = sub.items()
                if kind == "choice":
                    assignment[name] = args[int(rng.integers(len(args)))]
                elif kind == "uniform":
                    assignment[name] = float(rng.uniform(args[0], args[1]))
                else:  # loguniform
                    assignment[name] = float(
                        math.exp(rng.uniform(math.log(args[0]), math.log(args[1])))
                    )
        out.append(assignment)
    return out


# --------------------------------------------------------------------------
# scorers


def _slot_tokens(inst: FirmYearInstance) -> list[list[str]]:
    return [list(_tokens(text)) for text in inst.history_texts]


@dataclass(eq=False)
class ClassicalScorer:
    """Bag-of-words + logistic regression, ready to score instances."""

    model_kind: str
    history_len: int
    vocab: Vocabulary
    space: FeatureSpace
    selector: FeatureSelector
    logreg: LogisticModel
    fit_anchor_max: dt.date
    tfidf_model: object | None = None

    def _vectorize(self, inst: FirmYearInstance) -> SparseVector:
        capped = [apply_vocab(toks, self.vocab) for toks in _slot_tokens(inst)]
        grams = instance_grams(capped)
        if self.model_kind == "binary":
            vec = binarize(self.space.vectorize(grams))
        else:
            vec = self.tfidf_model.transform(grams)
        return project(vec, self.selector)

    def score(self, instances: Sequence[FirmYearInstance]) -> np.ndarray:
        self._check_history(instances)
        X = stack_csr([self._vectorize(i) for i in instances])
        return self.logreg.predict_proba(X)

    def _check_history(self, instances) -> None:
        bad = {i.history_len for i in instances} - {self.history_len}
        if bad:
            raise ValueError(
                f"scorer expects history_len={self.history_len}, "
                f"got instances with {sorted(bad)}"
            )

    def save(self, dir_path: str | Path) -> None:
        d = Path(dir_path)
        d.mkdir(parents=True, exist_ok=True)
        manifest = {
            "kind": self.model_kind,
            "history_len": self.history_len,
            "fit_anchor_max": self.fit_anchor_max.isoformat(),
        }
        (d / "scorer.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        )
        self.vocab.save(d / "vocab.tsv")
        self.space.save(d / "feature_space.tsv")
        self.selector.save(d / "selector.tsv")
        self.logreg.save(d / "model.json")

    @classmethod
    def load(cls, dir_path: str | Path) -> "ClassicalScorer":
        d = Path(dir_path)
        manifest = json.loads((d / "scorer.json").read_text())
        space = FeatureSpace.load(d / "feature_space.tsv")
        kind = manifest["kind"]
        return cls(
            model_kind=kind,
            history_len=int(manifest["history_len"]),
            vocab=Vocabulary.load(d / "vocab.tsv"),
            space=space,
            selector=FeatureSelector.load(d / "selector.tsv", space),
            logreg=LogisticModel.load(d / "model.json"),
            fit_anchor_max=dt.date.fromisoformat(manifest["fit_anchor_max"]),
            tfidf_model=fit_tfidf(space) if kind == "tfidf" else None,
        )


@dataclass(eq=False)
class EmbeddingScorer:
    """Document embeddings (trained or imported) + MLP head."""

    model_kind: str
    history_len: int
    mlp: MlpModel
    fit_anchor_max: dt.date
    vocab: Vocabulary | None = None
    w2v: SkipGramModel | None = None
    table: Mapping[str, DocEmbedding] | None = None
    table_path: str | None = None

    def _embed_slots(self, inst: FirmYearInstance) -> list[DocEmbedding]:
        if self.model_kind == "w2v":
            out = []
            for text in inst.history_texts:
                ids = [self.vocab.id_for(t) for t in _tokens(text)]
                out.append(embed_doc(ids, self.w2v))
            return out
        missing = [
            key
            for slot in range(inst.history_len)
            if (key := inst.doc_key(slot)) not in self.table
        ]
        if missing:
            raise KeyError(
                f"embedding table is missing {len(missing)} doc keys, "
                f"e.g. {missing[:5]}"
            )
        return [self.table[inst.doc_key(s)] for s in range(inst.history_len)]

    def features_matrix(self, instances: Sequence[FirmYearInstance]) -> np.ndarray:
        self._check_history(instances)
        missing: list[str] = []
        rows = []
        for inst in instances:
            try:
                rows.append(concat_history(self._embed_slots(inst)))
            except KeyError:
                # keep collecting so the error names every absent key group
                missing.extend(
                    key
                    for slot in range(inst.history_len)
                    if (key := inst.doc_key(slot)) not in self.table
                )
        if missing:
            shown = ", ".join(missing[:10])
            raise KeyError(
                f"embedding table is missing {len(missing)} doc keys: {shown}"
                + (", ..." if len(missing) > 10 else "")
            )
        return np.vstack(rows)

    def score(self, instances: Sequence[FirmYearInstance]) -> np.ndarray:
        return self.mlp.predict_proba(self.features_matrix(instances))

    def _check_history(self, instances) -> None:
        bad = {i.history_len for i in instances} - {self.history_len}
        if bad:
            raise ValueError(
                f"scorer expects history_len={self.history_len}, "
                f"got instances with {sorted(bad)}"
            )

    def save(self, dir_path: str | Path) -> None:
        d = Path(dir_path)
        d.mkdir(parents=True, exist_ok=True)
        manifest = {
            "kind": self.model_kind,
            "history_len": self.history_len,
            "fit_anchor_max": self.fit_anchor_max.isoformat(),
            "embedding_table": self.table_path,
        }
        (d / "scorer.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        )
        self.mlp.save(d / "mlp.json")
        if self.model_kind == "w2v":
            self.vocab.save(d / "vocab.tsv")
            self.w2v.save(d / "embeddings.vec")

    @classmethod
    def load(cls, dir_path: str | Path) -> "EmbeddingScorer":
        d = Path(dir_path)
        manifest = json.loads((d / "scorer.json").read_text())
        kind = manifest["kind"]
        scorer = cls(
            model_kind=kind,
            history_len=int(manifest["history_len"]),
            mlp=MlpModel.load(d / "mlp.json"),
            fit_anchor_max=dt.date.fromisoformat(manifest["fit_anchor_max"]),
            table_path=manifest.get("embedding_table"),
        )
        if kind == "w2v":
            scorer.vocab = Vocabulary.load(d / "vocab.tsv")
            scorer.w2v = SkipGramModel.load(d / "embeddings.vec")
        else:
            if not scorer.table_path:
                raise ValueError(f"{d}: manifest lacks embedding_table")
            scorer.table = load_embedding_table(scorer.table_path)
        return scorer


def load_scorer(dir_path: str | Path):
    """Open a saved scorer directory, dispatching on its manifest."""
    manifest = json.loads((Path(dir_path) / "scorer.json").read_text())
    kind = manifest["kind"]
    if kind in CLASSICAL_KINDS:
        return ClassicalScorer.load(dir_path)
    if kind in EMBEDDING_KINDS:
        return EmbeddingScorer.load(dir_path)
    raise ValueError(f"unknown scorer kind {kind!r}")


# --------------------------------------------------------------------------
# pipelines


def _fit_anchor(instances: Sequence[FirmYearInstance]) -> dt.date:
    return max(i.window_start for i in instances)


def classical_pipeline(
    model_kind: str,
    instances: Sequence[FirmYearInstance],
    hyperparams: Mapping[str, object],
    *,
    vocab_max_size: int = 50_000,
    rng_seed: int = 0,
) -> ClassicalScorer:
    """Undersample 90/10, build BoW features, select by chi², fit logreg.

    The vocabulary and feature space are built on the undersampled set
    only — vocabulary construction is the reason the downsampling exists.
    """
    if model_kind not in CLASSICAL_KINDS:
        raise ValueError(f"classical_pipeline got model_kind {model_kind!r}")
    sampled = undersample(
        list(instances), UNDERSAMPLE_MAJORITY_FRAC, rng_seed=rng_seed
    )
    slot_tokens = [_slot_tokens(i) for i in sampled]
    vocab = build_vocab(
        (toks for slots in slot_tokens for toks in slots), max_size=vocab_max_size
    )
    gram_counts = [
        instance_grams([apply_vocab(toks, vocab) for toks in slots])
        for slots in slot_tokens
    ]
    space = FeatureSpace.fit(gram_counts)
    if model_kind == "binary":
        k = BINARY_K
        tfidf_model = None
        vectors = [binarize(space.vectorize(g)) for g in gram_counts]
    else:
        k = int(hyperparams["k"])
        tfidf_model = fit_tfidf(space)
        vectors = [tfidf_model.transform(g) for g in gram_counts]
    labels = np.array([i.label for i in sampled], dtype=np.float64)
    selector = select_top_k(stack_csr(vectors), labels, space, k)
    projected = stack_csr([project(v, selector) for v in vectors])
    logreg = train_logreg(
        projected,
        labels,
        float(hyperparams["C"]),
        feature_space_ref="feature_space.tsv",
    )
    return ClassicalScorer(
        model_kind=model_kind,
        history_len=instances[0].history_len,
        vocab=vocab,
        space=space,
        selector=selector,
        logreg=logreg,
        fit_anchor_max=_fit_anchor(instances),
        tfidf_model=tfidf_model,
    )


def train_history_embeddings(
    instances: Sequence[FirmYearInstance],
    *,
    vocab_max_size: int = 50_000,
    w2v_params: Mapping[str, object] | None = None,
    seed: int = 0,
) -> tuple[Vocabulary, SkipGramModel]:
    """Fit the vocabulary and skip-gram vectors on training texts.

    Each distinct (company, slot-year) report text is one training
    document; history overlap between consecutive instances does not
    duplicate it.  Hyperparameter trials share this result — the word
    vectors depend only on the corpus and the experiment seed.
    """
    params = {**_W2V_DEFAULTS, **(dict(w2v_params) if w2v_params else {})}
    unknown = set(params) - set(_W2V_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown w2v settings: {sorted(unknown)}")
    unique: dict[tuple[str, int], str] = {}
    for inst in instances:
        first_year = inst.considered_year - inst.history_len + 1
        for offset, text in enumerate(inst.history_texts):
            unique.setdefault((inst.company_id, first_year + offset), text)
    docs_tokens = [_tokens(text) for _, text in sorted(unique.items())]
    vocab = build_vocab((list(toks) for toks in docs_tokens), max_size=vocab_max_size)
    docs_ids = [[vocab.id_for(t) for t in toks] for toks in docs_tokens]
    model = train_skipgram(
        docs_ids,
        vocab.tokens,
        d=int(params["d"]),
        window=int(params["window"]),
        negatives=int(params["negatives"]),
        epochs=int(params["epochs"]),
        lr=float(params["lr"]),
        seed=seed,
    )
    return vocab, model


def embedding_pipeline(
    source: str,
    instances: Sequence[FirmYearInstance],
    hyperparams: Mapping[str, object],
    *,
    prebuilt: tuple[Vocabulary, SkipGramModel] | None = None,
    table: Mapping[str, DocEmbedding] | None = None,
    table_path: str | None = None,
    vocab_max_size: int = 50_000,
    w2v_params: Mapping[str, object] | None = None,
    mlp_params: Mapping[str, object] | None = None,
    rng_seed: int = 0,
) -> EmbeddingScorer:
    """Embed history slots, concatenate, train the MLP head.

    No undersampling on this path: the full training set is used.  A
    seeded 10% carve-out of the training instances drives early
    stopping (the validation years stay reserved for the tuning
    objective).
    """
    if source not in EMBEDDING_KINDS:
        raise ValueError(f"embedding_pipeline got source {source!r}")
    if not instances:
        raise ValueError("training set is empty")
    if source == "imported_embedding" and table is None:
        raise ValueError("imported_embedding requires an embedding table")

    if source == "w2v":
        if prebuilt is None:
            prebuilt = train_history_embeddings(
                instances,
                vocab_max_size=vocab_max_size,
                w2v_params=w2v_params,
                seed=_derive_seed(rng_seed, 0),
            )
        vocab, w2v_model = prebuilt
    else:
        vocab, w2v_model = None, None

    scorer = EmbeddingScorer(
        model_kind=source,
        history_len=instances[0].history_len,
        mlp=None,  # filled below; features_matrix does not touch it
        fit_anchor_max=_fit_anchor(instances),
        vocab=vocab,
        w2v=w2v_model,
        table=table,
        table_path=table_path,
    )
    X = scorer.features_matrix(instances)
    y = np.array([i.label for i in instances], dtype=np.float64)

    carve_rng = np.random.default_rng(np.random.SeedSequence([rng_seed, 1]))
    order = carve_rng.permutation(len(instances))
    n_val = max(1, round(EARLY_STOP_FRAC * len(instances)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise ValueError("training set too small to carve an early-stop split")

    fixed = {**_MLP_DEFAULTS, **(dict(mlp_params) if mlp_params else {})}
    hp = MlpHyperparams(
        learning_rate=float(hyperparams["learning_rate"]),
        weight_decay=float(hyperparams["weight_decay"]),
        hidden=int(hyperparams["hidden"]),
        dropout=float(hyperparams["dropout"]),
        batch_size=int(fixed["batch_size"]),
        max_epochs=int(fixed["max_epochs"]),
        patience=int(fixed["patience"]),
    )
    mlp, _ = train_mlp(
        X[train_idx], y[train_idx], X[val_idx], y[val_idx],
        hp, seed=_derive_seed(rng_seed, 2),
    )
    scorer.mlp = mlp
    return scorer


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class DatasetBundle:
    """All instance sets one experiment needs, both phases."""

    train_phase1: tuple[FirmYearInstance, ...]
    validation: Mapping[int, tuple[FirmYearInstance, ...]]
    train_phase2: tuple[FirmYearInstance, ...]
    test: Mapping[int, tuple[FirmYearInstance, ...]]
    phase2_split: SplitSpec


def build_datasets(companies, split: SplitSpec) -> DatasetBundle:
    """Materialize phase-1/phase-2 training sets and all eval years.

    The phase-2 cutoff is ``min(test_years) - 2``: training labels need
    bankruptcies through cutoff+1, so that is the latest cutoff whose
    label window closes before the first test year begins.
    """
    companies = list(companies)
    phase2 = dataclasses.replace(
        split,
        train_cutoff_year=min(split.test_years) - 2,
        validation_years=(),
    )
    return DatasetBundle(
        train_phase1=tuple(build_training_set(companies, split)),
        validation={
            y: tuple(build_eval_set(companies, y, split))
            for y in split.validation_years
        },
        train_phase2=tuple(build_training_set(companies, phase2)),
        test={
            y: tuple(build_eval_set(companies, y, phase2))
            for y in split.test_years
        },
        phase2_split=phase2,
    )


# --------------------------------------------------------------------------
# tuning


@dataclass(frozen=True)
class TrialResult:
    """One hyperparameter assignment and its validation outcome."""

    trial_id: int
    hyperparams: Mapping[str, object]
    val_auc_by_year: Mapping[int, float]
    weights: Mapping[int, int]
    objective: float
    artifacts_path: str

    def __post_init__(self):
        total = sum(self.weights.values())
        want = (
            sum(self.weights[y] * self.val_auc_by_year[y] for y in self.weights)
            / total
        )
        if not math.isclose(self.objective, want, rel_tol=0, abs_tol=1e-12):
            raise ValueError("objective must be the weighted mean of year AUCs")

    def to_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "hyperparams": dict(self.hyperparams),
            "val_auc_by_year": {str(y): v for y, v in self.val_auc_by_year.items()},
            "weights": {str(y): w for y, w in self.weights.items()},
            "objective": self.objective,
        }


def weighted_auc_objective(
    val_auc_by_year: Mapping[int, float], weights: Mapping[int, int]
) -> float:
    """Instance-count-weighted mean of per-year validation AUCs."""
    total = sum(weights.values())
    if total == 0:
        raise ValueError("validation sets are empty")
    return sum(weights[y] * val_auc_by_year[y] for y in weights) / total


def _build_scorer(
    config: ExperimentConfig,
    train_instances: Sequence[FirmYearInstance],
    hyperparams: Mapping[str, object],
    *,
    rng_seed: int,
    prebuilt_w2v=None,
    table=None,
):
    if config.model_kind in CLASSICAL_KINDS:
        return classical_pipeline(
            config.model_kind,
            train_instances,
            hyperparams,
            vocab_max_size=config.vocab_max_size,
            rng_seed=rng_seed,
        )
    return embedding_pipeline(
        config.model_kind,
        train_instances,
        hyperparams,
        prebuilt=prebuilt_w2v,
        table=table,
        table_path=config.embedding_table,
        vocab_max_size=config.vocab_max_size,
        w2v_params=config.w2v_params,
        mlp_params=config.mlp_params,
        rng_seed=rng_seed,
    )


def tune(
    config: ExperimentConfig,
    datasets: DatasetBundle,
    *,
    objective: Callable[[Mapping, Mapping], float] = weighted_auc_objective,
    threads: int = 1,
    prebuilt_w2v=None,
    table=None,
) -> tuple[TrialResult, list[TrialResult]]:
    """Run every trial, persist its artifacts, return the best result.

    Ties on the objective go to the earliest trial id.  Individual trial
    failures are recorded (``trials/<id>/FAILED.json``) and tolerated;
    if every trial fails, the causes are aggregated into one error.
    """
    if config.search == "grid":
        assignments = grid_assignments(config.space)
    else:
        assignments = random_assignments(config.space, config.n_trials, config.seed)
    trials_dir = Path(config.out_dir) / "trials"
    trials_dir.mkdir(parents=True, exist_ok=True)

    weights = {y: len(insts) for y, insts in datasets.validation.items()}

    def run_trial(trial_id: int, assignment: Mapping[str, object]) -> TrialResult:
        trial_dir = trials_dir / str(trial_id)
        trial_dir.mkdir(parents=True, exist_ok=True)
        seed = _derive_seed(config.seed, 2, trial_id)
        (trial_dir / "config.json").write_text(
            json.dumps(
                {"hyperparams": dict(assignment), "seed": seed, "trial_id": trial_id},
                sort_keys=True,
                indent=2,
            )
            + "\n"
        )
        scorer = _build_scorer(
            config,
            datasets.train_phase1,
            assignment,
            rng_seed=seed,
            prebuilt_w2v=prebuilt_w2v,
            table=table,
        )
        aucs = {}
        for year, instances in datasets.validation.items():
            preds = RankedPredictions(
                scorer.score(instances),
                np.array([i.label for i in instances]),
            )
            aucs[year] = roc_auc(preds)
        result = TrialResult(
            trial_id=trial_id,
            hyperparams=dict(assignment),
            val_auc_by_year=aucs,
            weights=weights,
            objective=objective(aucs, weights),
            artifacts_path=str(trial_dir),
        )
        scorer.save(trial_dir / "model")
        (trial_dir / "report.json").write_text(
            json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"
        )
        return result

    results: list[TrialResult] = []
    failures: list[tuple[int, str]] = []

    def guarded(trial_id, assignment):
        try:
            return run_trial(trial_id, assignment)
        except Exception as exc:  # noqa: BLE001 — cause aggregated below
            (trials_dir / str(trial_id)).mkdir(parents=True, exist_ok=True)
            (trials_dir / str(trial_id) / "FAILED.json").write_text(
                json.dumps({"error": f"{type(exc).__name__}: {exc}"}, indent=2)
                + "\n"
            )
            return (trial_id, f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(guarded, range(len(assignments)), assignments))
    else:
        outcomes = [guarded(i, a) for i, a in enumerate(assignments)]
    for outcome in outcomes:
        if isinstance(outcome, TrialResult):
            results.append(outcome)
        else:
            failures.append(outcome)

    if not results:
        detail = "; ".join(f"trial {i}: {msg}" for i, msg in failures)
        raise RuntimeError(f"all {len(failures)} trials failed — {detail}")

    best = max(results, key=lambda t: (t.objective, -t.trial_id))
    (trials_dir / "best.json").write_text(
        json.dumps(best.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    return best, results


# --------------------------------------------------------------------------
# full experiment


class StageError(RuntimeError):
    """A pipeline stage failed; partial state is on disk."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def run_experiment(
    config: ExperimentConfig, *, threads: int = 1
) -> dict[int, MetricsReport]:
    """Load → build datasets → tune → final train → evaluate.

    Writes ``experiment.json``, per-trial artifacts, the final model,
    and one ``final/report_<year>.json`` per test year under
    ``config.out_dir``; ``state.json`` tracks stage completion so an
    aborted run says how far it got.
    """
    from .corpus import load_corpus_dir

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "experiment.json")
    state = {"completed": [], "failed": None, "error": None}

    def checkpoint():
        (out / "state.json").write_text(
            json.dumps(state, sort_keys=True, indent=2) + "\n"
        )

    def stage(name: str, fn):
        try:
            value = fn()
        except Exception as exc:
            state["failed"] = name
            state["error"] = f"{type(exc).__name__}: {exc}"
            checkpoint()
            raise StageError(name, exc) from exc
        state["completed"].append(name)
        checkpoint()
        return value

    companies = stage(
        "load_corpus", lambda: load_corpus_dir(config.corpus_dir).companies
    )
    datasets = stage(
        "build_datasets", lambda: build_datasets(companies, config.split)
    )

    table = None
    if config.model_kind == "imported_embedding":
        table = stage(
            "load_embedding_table",
            lambda: load_embedding_table(config.embedding_table),
        )

    prebuilt_phase1 = None
    if config.model_kind == "w2v":
        prebuilt_phase1 = stage(
            "train_word_vectors",
            lambda: train_history_embeddings(
                datasets.train_phase1,
                vocab_max_size=config.vocab_max_size,
                w2v_params=config.w2v_params,
                seed=_derive_seed(config.seed, 1),
            ),
        )

    best, _ = stage(
        "tune",
        lambda: tune(
            config,
            datasets,
            threads=threads,
            prebuilt_w2v=prebuilt_phase1,
            table=table,
        ),
    )

    def final_train():
        prebuilt_phase2 = None
        if config.model_kind == "w2v":
            prebuilt_phase2 = train_history_embeddings(
                datasets.train_phase2,
                vocab_max_size=config.vocab_max_size,
                w2v_params=config.w2v_params,
                seed=_derive_seed(config.seed, 4),
            )
        scorer = _build_scorer(
            config,
            datasets.train_phase2,
            best.hyperparams,
            rng_seed=_derive_seed(config.seed, 3),
            prebuilt_w2v=prebuilt_phase2,
            table=table,
        )
        final_dir = out / "final"
        final_dir.mkdir(parents=True, exist_ok=True)
        scorer.save(final_dir / "model")
        (final_dir / "config.json").write_text(
            json.dumps(
                {
                    "hyperparams": dict(best.hyperparams),
                    "selected_trial": best.trial_id,
                    "train_cutoff_year": datasets.phase2_split.train_cutoff_year,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n"
        )
        return scorer

    scorer = stage("final_train", final_train)

    def evaluate():
        reports = {}
        for year, instances in datasets.test.items():
            earliest = min(i.window_start for i in instances)
            if scorer.fit_anchor_max >= earliest:
                raise RuntimeError(
                    f"fitted statistics anchored at {scorer.fit_anchor_max} "
                    f"do not strictly precede the {year} evaluation anchor "
                    f"{earliest}"
                )
            preds = RankedPredictions(
                scorer.score(instances),
                np.array([i.label for i in instances]),
            )
            report = compute_report(preds, k=100)
            (out / "final" / f"report_{year}.json").write_text(
                report.to_json() + "\n"
            )
            reports[year] = report
        return reports

    return stage("evaluate", evaluate)
