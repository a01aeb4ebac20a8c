"""Ranking metrics for rare-event prediction
============================================

Bankruptcy is rare (well under 1% of firm-years), so accuracy is
useless and every evaluation here is a ranking evaluation: sort the
population by predicted risk and ask where the true failures landed.
Five complementary views are computed -- ROC AUC, average precision,
recall@k, the CAP accuracy ratio, and cumulative positives by decile.

This script
1. scores a toy population and walks through each metric,
2. shows how ties are handled (average ranks, not input order),
3. shows the degenerate cases pinned by the implementation, and
4. writes ROC and CAP curves as CSV.
"""

import tempfile
from pathlib import Path

import numpy as np

from bankbench.metrics import (
    RankedPredictions,
    average_precision,
    cap_ratio,
    compute_report,
    decile_ranks,
    recall_at_k,
    roc_auc,
    write_cap_csv,
    write_roc_csv,
)

OUT = Path(tempfile.gettempdir()) / "bankbench_demos" / "05_metrics"
OUT.mkdir(parents=True, exist_ok=True)

# ----------------------------------------------------------------------
# 1. A small population, scored imperfectly
# ----------------------------------------------------------------------
# 200 firms, 8 failures.  The scorer is informative but noisy: failures
# score around 0.7, survivors around 0.3.
rng = np.random.default_rng(3)
labels = np.zeros(200, dtype=int)
labels[rng.choice(200, size=8, replace=False)] = 1
scores = np.where(labels == 1, 0.7, 0.3) + rng.normal(0, 0.18, size=200)
preds = RankedPredictions(scores, labels)

print(f"population: {len(preds)} firms, {preds.n_pos} failures")
print(f"AUC          {roc_auc(preds):.3f}   "
      "(probability a failure outranks a survivor)")
print(f"AP           {average_precision(preds):.3f}   "
      "(precision averaged at each recalled failure)")
print(f"recall@20    {recall_at_k(preds, 20):.3f}   "
      "(failures caught in a 20-firm review budget)")
print(f"CAP ratio    {cap_ratio(preds):.3f}   "
      "(captured-positives area vs the perfect model)")
deciles = decile_ranks(preds)
print("cumulative positives by risk decile:")
print("  " + "  ".join(f"{i + 1}:{v:.2f}" for i, v in enumerate(deciles)))

# ----------------------------------------------------------------------
# 2. Ties are averaged, never broken by input order
# ----------------------------------------------------------------------
# Three firms share one score; swapping their input order cannot change
# any metric.  A constant scorer is exactly chance: AUC 0.5.
tied = RankedPredictions([0.9, 0.5, 0.5, 0.5, 0.1], [1, 1, 0, 0, 0])
swapped = RankedPredictions([0.9, 0.5, 0.5, 0.5, 0.1], [1, 0, 0, 1, 0])
print(f"\ntied block, positive first vs last: "
      f"AUC {roc_auc(tied):.4f} == {roc_auc(swapped):.4f}")
constant = RankedPredictions(np.full(50, 0.2), labels[:50])
print(f"constant scores: AUC {roc_auc(constant):.1f} (chance by definition)")

# ----------------------------------------------------------------------
# 3. Degenerate cases are pinned, not accidental
# ----------------------------------------------------------------------
perfect = RankedPredictions([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
inverted = RankedPredictions([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0])
print(f"\nperfect ranking:  AUC {roc_auc(perfect):.1f}  "
      f"CAP {cap_ratio(perfect):.1f}")
print(f"inverted ranking: AUC {roc_auc(inverted):.1f}  "
      f"CAP {cap_ratio(inverted):.1f}")
try:
    roc_auc(RankedPredictions([0.5, 0.6], [1, 1]))
except ValueError as exc:
    print(f"single-class population is refused: {exc}")

# ----------------------------------------------------------------------
# 4. Everything at once, plus the curves
# ----------------------------------------------------------------------
report = compute_report(preds, k=20)
print("\nfull report as JSON:")
print(report.to_json())

write_roc_csv(preds, OUT / "roc.csv")
write_cap_csv(preds, OUT / "cap.csv")
print(f"\ncurve points written to {OUT}/roc.csv and {OUT}/cap.csv")
print("(two columns each; plot with any tool)")
