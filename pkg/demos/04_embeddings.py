"""Document embeddings: trained word vectors and imported tables
================================================================

The embedding models replace sparse bags-of-words with a dense vector
per history slot.  Two sources are supported: skip-gram word vectors
trained on the training narratives themselves (slot embedding = mean of
its word vectors), and an external table of precomputed document
embeddings keyed by "cik:year:slot".  Either way the slot vectors are
concatenated and a small MLP with dropout scores the result.

This script
1. trains skip-gram vectors on report histories,
2. inspects the geometry (nearest neighbours of a distress word),
3. trains the MLP head on top and scores a held-out year, and
4. does the same through an imported embedding table.
"""

import tempfile
from pathlib import Path

import numpy as np

from bankbench.corpus import (
    MissingMechanisms,
    SyntheticConfig,
    generate_synthetic,
)
from bankbench.embeddings import DocEmbedding, write_embedding_table
from bankbench.harness import embedding_pipeline, train_history_embeddings
from bankbench.metrics import RankedPredictions, compute_report
from bankbench.sampling import SplitSpec, build_eval_set, build_training_set

OUT = Path(tempfile.gettempdir()) / "bankbench_demos" / "04_embeddings"
OUT.mkdir(parents=True, exist_ok=True)

DISTRESS = (
    "waiver", "covenant", "forbearance", "insolvency", "liquidity",
    "collateral", "indenture", "severance", "downgrade", "impairment",
)

# ----------------------------------------------------------------------
# 1. Word vectors from the training narratives
# ----------------------------------------------------------------------
# A deliberately failure-rich corpus: skip-gram learns from raw
# co-occurrence, so the demo needs enough distress narratives for the
# lexicon to leave a dense co-occurrence footprint.
companies = generate_synthetic(SyntheticConfig(
    n_companies=200,
    year_range=(2009, 2020),
    base_bankruptcy_rate=0.20,
    distress_lexicon=DISTRESS,
    distress_injection_rate=1.0,
    missing_mechanisms=MissingMechanisms(0.02, 0.02, 0.03),
    doc_length_mean=60,
    doc_length_std=10,
    rng_seed=9,
    background_vocab_size=800,
))
split = SplitSpec(
    train_cutoff_year=2015,
    validation_years=(2017,),
    test_years=(2019,),
)
train = build_training_set(companies, split)
holdout = build_eval_set(companies, 2017, split)
print(f"training on {len(train)} instances "
      f"({sum(i.label for i in train)} positive)")

w2v_params = {"d": 16, "window": 5, "negatives": 5, "epochs": 15, "lr": 0.05}
vocab, model = train_history_embeddings(
    train, vocab_max_size=5000, w2v_params=w2v_params, seed=0
)
print(f"skip-gram: {len(model.vocab)} tokens embedded in "
      f"{model.dim} dimensions")
print("epoch losses: "
      + "  ".join(f"{loss:.4f}" for loss in model.epoch_losses))

# ----------------------------------------------------------------------
# 2. Geometry: distress words co-occur, so they cluster
# ----------------------------------------------------------------------
# The generator injects the distress lexicon into the same documents,
# which is exactly the co-occurrence signal skip-gram encodes.
query = "insolvency"
q = model.vector(query)
V = model.input_vectors
sims = (V @ q) / (np.linalg.norm(V, axis=1) * np.linalg.norm(q) + 1e-12)
top = np.argsort(-sims)[1:9]  # skip the query itself
print(f"\nnearest neighbours of '{query}':")
for i in top:
    marker = " <- planted" if model.vocab[i] in DISTRESS else ""
    print(f"  {sims[i]:.3f}  {model.vocab[i]}{marker}")

# ----------------------------------------------------------------------
# 3. The MLP head on trained vectors
# ----------------------------------------------------------------------
hyperparams = {
    "learning_rate": 5e-3,
    "weight_decay": 1e-4,
    "hidden": 32,
    "dropout": 0.2,
}
scorer = embedding_pipeline(
    "w2v",
    train,
    hyperparams,
    prebuilt=(vocab, model),
    mlp_params={"max_epochs": 100, "patience": 10},
    rng_seed=0,
)
labels = np.array([inst.label for inst in holdout])
report = compute_report(
    RankedPredictions(scorer.score(holdout), labels), k=50
)
print(f"\ntrained-vector MLP on 2017 holdout:  AUC {report.auc:.3f}  "
      f"AP {report.ap:.3f}  recall@{report.k} {report.recall_at_k:.3f}")

# ----------------------------------------------------------------------
# 4. The same head on an imported table
# ----------------------------------------------------------------------
# External encoders ship their document vectors as a TSV keyed by
# cik:year:slot.  Here the "encoder" is a stand-in: random vectors
# shifted along one axis for positive instances, so the head has
# something to find.
rng = np.random.default_rng(0)
table = {}
for inst in [*train, *holdout]:
    for slot in range(split.history_len):
        key = f"{inst.company_id}:{inst.considered_year}:{slot}"
        vec = rng.normal(size=16)
        vec[0] += 3.0 * inst.label
        table[key] = DocEmbedding(vector=vec, source="imported")
table_path = OUT / "doc_embeddings.tsv"
write_embedding_table(table, table_path)
print(f"\nwrote a {len(table)}-row embedding table "
      f"({table_path.name}, dim 16)")

imported = embedding_pipeline(
    "imported_embedding",
    train,
    hyperparams,
    table=table,
    table_path=str(table_path),
    mlp_params={"max_epochs": 100, "patience": 10},
    rng_seed=0,
)
report = compute_report(
    RankedPredictions(imported.score(holdout), labels), k=50
)
print(f"imported-table MLP on 2017 holdout:  AUC {report.auc:.3f}  "
      f"AP {report.ap:.3f}  recall@{report.k} {report.recall_at_k:.3f}")
